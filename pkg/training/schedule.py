"""Linear warmup followed by cosine decay."""

import math
from dataclasses import dataclass

from config.app_config import FULL_SCALE_LR_MIN, FULL_SCALE_LR_PEAK, FULL_SCALE_LR_START, FULL_SCALE_WARMUP_STEPS


@dataclass(frozen=True)
class Schedule:
    warmup_steps: int
    lr_start: float
    lr_peak: float
    total_steps: int
    lr_min: float = 0.0

    def __post_init__(self):
        if self.lr_start > self.lr_peak:
            raise ValueError(f"lr_start {self.lr_start} exceeds lr_peak {self.lr_peak}")
        if not 0 <= self.warmup_steps <= self.total_steps:
            raise ValueError(f"warmup_steps {self.warmup_steps} outside [0, {self.total_steps}]")


def lr_at(s: Schedule, step: int) -> float:
    """
    Learning rate at a step.

    Warmup: lr_start -> lr_peak linearly over warmup_steps.
    Then:   lr_min + (lr_peak - lr_min) * 0.5 * (1 + cos(pi * progress)),
            progress = (step - warmup) / (total - warmup).

    Raises:
        ValueError: If step is outside [0, total_steps]
    """
    if not 0 <= step <= s.total_steps:
        raise ValueError(f"step {step} outside [0, {s.total_steps}]")
    if step < s.warmup_steps:
        return s.lr_start + (s.lr_peak - s.lr_start) * step / s.warmup_steps
    span = s.total_steps - s.warmup_steps
    if span == 0:
        return s.lr_peak
    progress = (step - s.warmup_steps) / span
    return s.lr_min + (s.lr_peak - s.lr_min) * 0.5 * (1.0 + math.cos(math.pi * progress))


def full_scale_schedule(total_steps: int) -> Schedule:
    """1K-step warmup from 1e-8 to 1e-5, cosine to 0."""
    return Schedule(warmup_steps=FULL_SCALE_WARMUP_STEPS, lr_start=FULL_SCALE_LR_START,
                    lr_peak=FULL_SCALE_LR_PEAK, total_steps=total_steps, lr_min=FULL_SCALE_LR_MIN)


def schedule_from_config(optim_cfg, total_steps: int) -> Schedule:
    return Schedule(warmup_steps=optim_cfg.warmup_steps, lr_start=optim_cfg.lr_start,
                    lr_peak=optim_cfg.lr_peak, total_steps=total_steps, lr_min=optim_cfg.lr_min)
