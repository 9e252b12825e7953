"""AdamW, learning-rate schedule, freeze sets, stage loops and checkpoint I/O."""

from training.checkpoint import load_checkpoint, read_header, save_checkpoint
from training.stages import (StageMetrics, pretrain_encoder, pretrain_lm, train_stage1,
                             train_stage2)

__all__ = [
    "save_checkpoint", "load_checkpoint", "read_header",
    "StageMetrics", "pretrain_lm", "pretrain_encoder", "train_stage1", "train_stage2",
]
