"""Run configuration schema.

Every section rejects unknown keys and every field has a default, so an empty
JSON object is a valid config (the "desk" scale).
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.app_config import (ADAMW_EPS, GLYPH_CHARSET, MODE_DUAL, FULL_SCALE_BETA1,
                               FULL_SCALE_BETA2, FULL_SCALE_WEIGHT_DECAY, VQA_KINDS)

# PAD, BOS, EOS, glyphs, space
DEFAULT_VOCAB_SIZE = 3 + len(GLYPH_CHARSET) + 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EncoderConfig(_Section):
    """Frozen ViT-style patch encoder."""

    image_size: int = Field(64, ge=1)
    patch_size: int = Field(8, ge=1)
    channels: Literal[1, 3] = 1
    d_v: int = Field(64, ge=1)
    depth: int = 3
    heads: int = Field(4, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if self.image_size % self.patch_size != 0:
            raise ValueError(f"image_size {self.image_size} not divisible by "
                             f"patch_size {self.patch_size}")
        if self.d_v % self.heads != 0:
            raise ValueError(f"d_v {self.d_v} not divisible by heads {self.heads}")
        if self.depth < 2:
            raise ValueError(f"encoder depth {self.depth} < 2: second-to-last layer undefined")
        return self

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid * self.grid

    @property
    def patch_dim(self) -> int:
        return self.channels * self.patch_size * self.patch_size


class QFormerConfig(_Section):
    num_queries: int = Field(8, ge=1)
    d_q: int = Field(64, ge=1)
    depth: int = Field(2, ge=1)
    heads: int = Field(4, ge=1)
    instruction_aware: bool = True
    max_instruction: int = Field(32, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if self.d_q % self.heads != 0:
            raise ValueError(f"d_q {self.d_q} not divisible by heads {self.heads}")
        return self


class ConnectorConfig(_Section):
    patch_kind: Literal["linear", "mlp"] = "linear"


class LMConfig(_Section):
    vocab_size: int = Field(DEFAULT_VOCAB_SIZE, ge=4)
    d_llm: int = Field(128, ge=1)
    depth: int = Field(4, ge=1)
    heads: int = Field(4, ge=1)
    max_seq: int = Field(160, ge=2)

    @model_validator(mode="after")
    def _check(self):
        if self.d_llm % self.heads != 0:
            raise ValueError(f"d_llm {self.d_llm} not divisible by heads {self.heads}")
        return self


class ModelConfig(_Section):
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    qformer: QFormerConfig = Field(default_factory=QFormerConfig)
    connector: ConnectorConfig = Field(default_factory=ConnectorConfig)
    lm: LMConfig = Field(default_factory=LMConfig)
    branches: List[Literal["query", "patch"]] = Field(default_factory=lambda: ["query", "patch"])

    @model_validator(mode="after")
    def _check(self):
        if not self.branches or len(set(self.branches)) != len(self.branches):
            raise ValueError(f"branches must be a non-empty set, got {self.branches}")
        return self


class DataConfig(_Section):
    grid: int = Field(8, ge=1)
    channels: Literal[1, 3] = 1
    min_words: int = Field(1, ge=0)
    max_words: int = Field(4, ge=0)
    min_word_len: int = Field(2, ge=1)
    max_word_len: int = Field(5, ge=1)
    kinds: List[Literal["read_cell", "read_word", "count_words"]] = Field(
        default_factory=lambda: list(VQA_KINDS))
    n_distractors: int = Field(3, ge=0)
    n_caption: int = Field(2000, ge=0)
    n_train: int = Field(4000, ge=0)
    n_test: int = Field(500, ge=0)
    random_crop: bool = False
    flip: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.min_words > self.max_words or self.min_word_len > self.max_word_len:
            raise ValueError("data: min bounds exceed max bounds")
        if not self.kinds:
            raise ValueError("data.kinds must not be empty")
        return self


class OptimConfig(_Section):
    lr_start: float = Field(1e-6, ge=0.0)
    lr_peak: float = Field(1e-3, ge=0.0)
    lr_min: float = Field(0.0, ge=0.0)
    warmup_steps: int = Field(100, ge=0)
    beta1: float = FULL_SCALE_BETA1
    beta2: float = FULL_SCALE_BETA2
    eps: float = ADAMW_EPS
    weight_decay: float = FULL_SCALE_WEIGHT_DECAY
    clip_norm: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.lr_start > self.lr_peak:
            raise ValueError(f"lr_start {self.lr_start} exceeds lr_peak {self.lr_peak}")
        return self


class StageConfig(_Section):
    enabled: bool = True
    steps: int = Field(1000, ge=0)
    batch_size: int = Field(16, ge=1)
    log_every: int = Field(50, ge=1)
    optim: OptimConfig = Field(default_factory=OptimConfig)

    @model_validator(mode="after")
    def _check(self):
        if self.optim.warmup_steps > self.steps:
            raise ValueError(f"warmup_steps {self.optim.warmup_steps} exceeds "
                             f"steps {self.steps}")
        return self


def _stage(steps: int, lr_peak: float, warmup: int, enabled: bool = True) -> StageConfig:
    return StageConfig(enabled=enabled, steps=steps,
                       optim=OptimConfig(lr_peak=lr_peak, warmup_steps=warmup))


class EvalConfig(_Section):
    beam_width: int = Field(3, ge=1)
    max_len: int = Field(32, ge=1)
    length_normalize: bool = False
    max_samples: Optional[int] = Field(None, ge=1)


class AblationConfig(_Section):
    caption_probe_samples: int = Field(64, ge=1)


class PathsConfig(_Section):
    data_dir: str = "runs/data"
    checkpoint_dir: str = "runs/checkpoints"
    metrics_log: str = "runs/metrics.jsonl"
    out: str = "runs/report.json"


class RunConfig(_Section):
    """Top-level run configuration."""

    model: ModelConfig = Field(default_factory=ModelConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    lm_pretrain: StageConfig = Field(default_factory=lambda: _stage(1500, 1e-3, 100))
    encoder_pretrain: StageConfig = Field(default_factory=lambda: _stage(500, 1e-3, 50, False))
    stage1: StageConfig = Field(default_factory=lambda: _stage(1000, 1e-3, 100))
    stage2: StageConfig = Field(default_factory=lambda: _stage(3000, 5e-4, 200))
    eval: EvalConfig = Field(default_factory=EvalConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    mode: Literal["query_only", "patch_only", "dual"] = MODE_DUAL
    seed: int = Field(0, ge=0)
    data_seed: int = Field(1, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.data.channels != self.model.encoder.channels:
            raise ValueError(f"data.channels {self.data.channels} != "
                             f"model.encoder.channels {self.model.encoder.channels}")
        return self
