"""Append-only JSON-lines log of per-step training metrics."""

import json
import logging
from typing import Optional

from utils.resource_path import ensure_parent_dir

logger = logging.getLogger(__name__)


class MetricsLog:
    """
    One JSON object per optimizer step: step, stage, lr, loss, wall_ms.

    A MetricsLog built with path=None only keeps records in memory.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.records = []
        if path:
            ensure_parent_dir(path)

    def append(self, step: int, stage: str, lr: float, loss: float, wall_ms: float) -> None:
        record = {"step": step, "stage": stage, "lr": lr, "loss": loss,
                  "wall_ms": round(wall_ms, 3)}
        self.records.append(record)
        if self.path:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record) + "\n")
