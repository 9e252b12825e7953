"""Training loops: LM text pre-training, encoder pre-training, stage 1 and stage 2."""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from autograd.rng import Rng
from autograd.tensor import Tensor, no_grad
from config.app_config import MODE_PATCH_ONLY
from config.run_config import RunConfig, StageConfig
from model.bliva import BlivaModel
from synth.preprocess import preprocess_eval, preprocess_train
from synth.samples import Sample
from training.checkpoint import save_checkpoint
from training.errors import EmptyDatasetError
from training.freeze import (STAGE_1, STAGE_2, STAGE_ENCODER_PRETRAIN, STAGE_LM_PRETRAIN,
                             apply_stage)
from training.metrics_log import MetricsLog
from training.optimizer import adamw_step, clip_grad_norm, make_state
from training.schedule import lr_at, schedule_from_config

logger = logging.getLogger(__name__)

PROBE_SAMPLES = 32


@dataclass
class StageMetrics:
    stage: str
    steps: int
    initial_loss: float
    final_loss: float
    losses: List[float] = field(default_factory=list)
    trainable: List[str] = field(default_factory=list)
    wall_ms: float = 0.0
    checkpoint_id: Optional[str] = None

    def to_dict(self) -> Dict:
        return asdict(self)


class FeatureSource:
    """
    Encoder features per sample.

    With a frozen encoder and the eval processor, features are computed once
    under no_grad and cached by sample index. Otherwise they are recomputed on
    every request (with a graph when the encoder is trainable).
    """

    def __init__(self, model: BlivaModel, samples: Sequence[Sample], random_crop: bool = False,
                 flip: bool = False, seed: int = 0, stage: str = ""):
        self.model = model
        self.samples = samples
        self.random_crop = random_crop
        self.flip = flip
        self.seed = seed
        self.stage = stage
        self._cache: Dict[int, Tensor] = {}

    @property
    def encoder_trainable(self) -> bool:
        return any(t.requires_grad for name, t in self.model.parameters().items()
                   if name.startswith("encoder."))

    def _image(self, index: int, step: int) -> Tensor:
        size = self.model.config.encoder.image_size
        image = self.samples[index].image
        if self.random_crop:
            rng = Rng.for_name(self.seed, f"{self.stage}/crop/{step}/{index}")
            return preprocess_train(image, size, rng, flip=self.flip)
        return preprocess_eval(image, size)

    def features(self, index: int, step: int = 0) -> Tensor:
        if self.encoder_trainable:
            return self.model.encode_image(self._image(index, step))
        if self.random_crop:
            with no_grad():
                return self.model.encode_image(self._image(index, step))
        if index not in self._cache:
            with no_grad():
                self._cache[index] = self.model.encode_image(self._image(index, step))
        return self._cache[index]


LossFn = Callable[[int, int], Tensor]


def _probe_loss(loss_fn: LossFn, n: int) -> float:
    with no_grad():
        return float(np.mean([loss_fn(i, 0).item() for i in range(min(n, PROBE_SAMPLES))]))


def _run_stage(model: BlivaModel, stage: str, samples: Sequence[Sample], stage_cfg: StageConfig,
               loss_fn: LossFn, seed: int, metrics_log: Optional[MetricsLog] = None,
               checkpoint_path: Optional[str] = None, mode: Optional[str] = None) -> StageMetrics:
    """
    Shared optimizer loop.

    Each step draws batch_size indices from a seeded shuffled order (reshuffled
    per epoch), accumulates gradients of loss / batch_size sample by sample,
    optionally clips, then takes one AdamW step at lr_at(step).
    """
    if not samples:
        raise EmptyDatasetError(f"{stage}: no training samples")
    trainable = apply_stage(model, stage, mode)
    schedule = schedule_from_config(stage_cfg.optim, stage_cfg.steps)
    state = make_state(stage_cfg.optim)
    params = model.parameters()
    order_rng = Rng.for_name(seed, stage)
    order: List[int] = []
    batch = min(stage_cfg.batch_size, len(samples))
    logger.info("%s: %d steps, batch %d, %d samples, %d trainable arrays",
                stage, stage_cfg.steps, batch, len(samples), len(trainable))

    start = time.perf_counter()
    initial = _probe_loss(loss_fn, len(samples))
    losses: List[float] = []
    for step in range(stage_cfg.steps):
        step_start = time.perf_counter()
        model.zero_grads()
        lr = lr_at(schedule, step)
        total = 0.0
        for _ in range(batch):
            if not order:
                order = list(range(len(samples)))
                order_rng.shuffle(order)
            index = order.pop()
            loss = loss_fn(index, step)
            total += loss.item()
            (loss / batch).backward()
        if stage_cfg.optim.clip_norm is not None:
            clip_grad_norm(params, stage_cfg.optim.clip_norm)
        adamw_step(params, state, lr)

        mean_loss = total / batch
        losses.append(mean_loss)
        wall_ms = (time.perf_counter() - step_start) * 1000.0
        if metrics_log is not None:
            metrics_log.append(step, stage, lr, mean_loss, wall_ms)
        if (step + 1) % stage_cfg.log_every == 0 or step + 1 == stage_cfg.steps:
            logger.info("%s step %d/%d lr=%.3e loss=%.4f", stage, step + 1, stage_cfg.steps,
                        lr, mean_loss)

    model.zero_grads()
    final = _probe_loss(loss_fn, len(samples))
    metrics = StageMetrics(stage=stage, steps=stage_cfg.steps, initial_loss=initial,
                           final_loss=final, losses=losses, trainable=trainable,
                           wall_ms=(time.perf_counter() - start) * 1000.0)
    logger.info("%s done: probe loss %.4f -> %.4f", stage, initial, final)
    if checkpoint_path:
        metrics.checkpoint_id = save_checkpoint(model, checkpoint_path, steps=stage_cfg.steps)
    return metrics


def pretrain_lm(model: BlivaModel, captions: Sequence[Sample], cfg: RunConfig,
                metrics_log: Optional[MetricsLog] = None,
                checkpoint_path: Optional[str] = None) -> StageMetrics:
    """Train the LM on caption text alone; the LM is frozen by every later stage."""

    def loss_fn(index: int, step: int) -> Tensor:
        return model.text_loss(captions[index].answer_ids)

    return _run_stage(model, STAGE_LM_PRETRAIN, captions, cfg.lm_pretrain, loss_fn, cfg.seed,
                      metrics_log, checkpoint_path)


def pretrain_encoder(model: BlivaModel, captions: Sequence[Sample], cfg: RunConfig,
                     metrics_log: Optional[MetricsLog] = None,
                     checkpoint_path: Optional[str] = None) -> StageMetrics:
    """Caption the image through the patch branch with the encoder trainable."""
    source = FeatureSource(model, captions, cfg.data.random_crop, cfg.data.flip, cfg.seed,
                           STAGE_ENCODER_PRETRAIN)

    def loss_fn(index: int, step: int) -> Tensor:
        return model.loss(source.features(index, step), [], captions[index].answer_ids,
                          MODE_PATCH_ONLY)

    return _run_stage(model, STAGE_ENCODER_PRETRAIN, captions, cfg.encoder_pretrain, loss_fn,
                      cfg.seed, metrics_log, checkpoint_path)


def train_stage1(model: BlivaModel, captions: Sequence[Sample], cfg: RunConfig,
                 metrics_log: Optional[MetricsLog] = None,
                 checkpoint_path: Optional[str] = None) -> StageMetrics:
    """
    Align the patch projection on image-caption pairs.

    Only connector.patch_proj is trainable. The question is empty, the caption
    is the answer and only the patch branch is assembled.

    Raises:
        EmptyDatasetError: If captions is empty
        ModeError: If the model has no patch branch
    """
    model.check_mode(MODE_PATCH_ONLY)
    source = FeatureSource(model, captions, cfg.data.random_crop, cfg.data.flip, cfg.seed,
                           STAGE_1)

    def loss_fn(index: int, step: int) -> Tensor:
        return model.loss(source.features(index, step), [], captions[index].answer_ids,
                          MODE_PATCH_ONLY)

    return _run_stage(model, STAGE_1, captions, cfg.stage1, loss_fn, cfg.seed, metrics_log,
                      checkpoint_path)


def train_stage2(model: BlivaModel, samples: Sequence[Sample], cfg: RunConfig,
                 mode: Optional[str] = None, metrics_log: Optional[MetricsLog] = None,
                 checkpoint_path: Optional[str] = None) -> StageMetrics:
    """
    Instruction-tune the Q-Former and projections on VQA samples.

    Encoder and LM stay frozen, as does any branch the mode does not run.
    mode defaults to cfg.mode.

    Raises:
        EmptyDatasetError: If samples is empty
        ModeError: If the model lacks a branch the mode needs
    """
    mode = mode or cfg.mode
    model.check_mode(mode)
    source = FeatureSource(model, samples, cfg.data.random_crop, cfg.data.flip, cfg.seed, STAGE_2)

    def loss_fn(index: int, step: int) -> Tensor:
        s = samples[index]
        return model.loss(source.features(index, step), s.question_ids, s.answer_ids, mode)

    return _run_stage(model, STAGE_2, samples, cfg.stage2, loss_fn, cfg.seed, metrics_log,
                      checkpoint_path, mode=mode)
