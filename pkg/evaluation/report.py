"""Report schemas and their JSON / CSV writers."""

import csv
import json
import logging
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from utils.resource_path import ensure_parent_dir

logger = logging.getLogger(__name__)

# Fields that legitimately differ between otherwise identical runs.
WALL_CLOCK_FIELDS = ("wall_ms",)


class SampleScore(BaseModel):
    id: str
    kind: str
    correct: bool
    answer_loss: float
    predicted: Optional[int] = None
    target: Optional[int] = None
    decoded: Optional[str] = None


class EvalReport(BaseModel):
    """Metrics of one evaluation run. Keys are fixed; see config/docs/README.md."""

    mode: str
    split: str
    n_samples: int = Field(ge=1)
    accuracy: float = Field(ge=0.0, le=1.0)
    mean_answer_loss: float
    per_kind: Dict[str, float]
    seed: int
    checkpoint_id: Optional[str] = None
    steps: int = 0
    caption_exact_match: Optional[float] = None
    caption_token_accuracy: Optional[float] = None
    per_sample: List[SampleScore] = Field(default_factory=list)
    wall_ms: float = 0.0


class ArmResult(BaseModel):
    arm: str
    mode: str
    report: EvalReport
    stage2_start_caption_loss: float
    improvement: Optional[float] = None
    stage_losses: Dict[str, List[float]] = Field(default_factory=dict)


class AblationReport(BaseModel):
    seed: int
    data_seed: int
    baseline: str
    arms: List[ArmResult]
    wall_ms: float = 0.0

    def arm(self, name: str) -> ArmResult:
        for a in self.arms:
            if a.arm == name:
                return a
        raise KeyError(name)


def stable_dump(report: BaseModel) -> Dict:
    """Report as a dict with wall-clock fields removed at every level."""

    def strip(value):
        if isinstance(value, dict):
            return {k: strip(v) for k, v in value.items() if k not in WALL_CLOCK_FIELDS}
        if isinstance(value, list):
            return [strip(v) for v in value]
        return value

    return strip(report.model_dump())


def write_json(report: BaseModel, path: str) -> str:
    with open(ensure_parent_dir(path), "w", encoding="utf-8") as f:
        f.write(report.model_dump_json(indent=2))
        f.write("\n")
    logger.info("Wrote report %s", path)
    return path


def ablation_rows(report: AblationReport) -> List[Dict[str, object]]:
    """Flat (arm, metric, value) rows."""
    rows: List[Dict[str, object]] = []
    for a in report.arms:
        rows.append({"arm": a.arm, "metric": "accuracy", "value": a.report.accuracy})
        rows.append({"arm": a.arm, "metric": "mean_answer_loss",
                     "value": a.report.mean_answer_loss})
        for kind, acc in sorted(a.report.per_kind.items()):
            rows.append({"arm": a.arm, "metric": f"accuracy/{kind}", "value": acc})
        rows.append({"arm": a.arm, "metric": "stage2_start_caption_loss",
                     "value": a.stage2_start_caption_loss})
        if a.improvement is not None:
            rows.append({"arm": a.arm, "metric": "improvement", "value": a.improvement})
    return rows


def eval_rows(report: EvalReport) -> List[Dict[str, object]]:
    rows = [{"arm": report.mode, "metric": "accuracy", "value": report.accuracy},
            {"arm": report.mode, "metric": "mean_answer_loss", "value": report.mean_answer_loss}]
    for kind, acc in sorted(report.per_kind.items()):
        rows.append({"arm": report.mode, "metric": f"accuracy/{kind}", "value": acc})
    return rows


def write_csv(rows: List[Dict[str, object]], path: str) -> str:
    with open(ensure_parent_dir(path), "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["arm", "metric", "value"])
        writer.writeheader()
        writer.writerows(rows)
    logger.info("Wrote table %s (%d rows)", path, len(rows))
    return path


def csv_path_for(json_path: str) -> str:
    stem = json_path[:-5] if json_path.endswith(".json") else json_path
    return stem + ".csv"
