"""Three-arm ablation: query-only baseline, dual without and with patch pre-training."""

import logging
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from config.app_config import MODE_DUAL, MODE_QUERY_ONLY
from config.run_config import RunConfig
from evaluation.evaluate import evaluate, mean_caption_loss
from evaluation.report import AblationReport, ArmResult, EvalReport
from model.bliva import BRANCH_PATCH, BRANCH_QUERY, GROUP_ENCODER, GROUP_LM, BlivaModel
from synth.dataset import CAPTION_SPLIT, TEST_SPLIT, TRAIN_SPLIT, generate_all
from synth.samples import Sample
from training.metrics_log import MetricsLog
from training.stages import pretrain_encoder, pretrain_lm, train_stage1, train_stage2

logger = logging.getLogger(__name__)

ARM_QUERY_ONLY = "query_only"
ARM_DUAL_NO_PRETRAIN = "dual_no_pretrain"
ARM_DUAL_WITH_PRETRAIN = "dual_with_pretrain"

# name, branches, evaluation mode, runs stage 1
ARMS = (
    (ARM_QUERY_ONLY, [BRANCH_QUERY], MODE_QUERY_ONLY, False),
    (ARM_DUAL_NO_PRETRAIN, [BRANCH_QUERY, BRANCH_PATCH], MODE_DUAL, False),
    (ARM_DUAL_WITH_PRETRAIN, [BRANCH_QUERY, BRANCH_PATCH], MODE_DUAL, True),
)


def relative_improvement(arm: EvalReport, baseline: EvalReport) -> Optional[float]:
    """
    Mean relative gain over the baseline, averaged across question kinds.

    Kinds where the baseline scores 0 are skipped; None when no kind remains.
    """
    gains = [(arm.per_kind[k] - base) / base
             for k, base in baseline.per_kind.items() if base > 0.0 and k in arm.per_kind]
    return float(np.mean(gains)) if gains else None


def copy_groups(source: BlivaModel, target: BlivaModel, prefixes: Sequence[str]) -> List[str]:
    """Copy parameter values whose names start with one of prefixes."""
    prefixes = tuple(prefixes)
    copied = []
    for name, t in source.parameters().items():
        if name.startswith(prefixes) and name in target.store:
            target.store[name].data = t.data.copy()
            copied.append(name)
    return copied


def run_ablation(cfg: RunConfig, data: Optional[Dict[str, List[Sample]]] = None,
                 metrics_log: Optional[MetricsLog] = None) -> AblationReport:
    """
    Train and evaluate the three arms from identical initialization.

    LM (and, when enabled, encoder) pre-training runs once and its weights are
    copied into every arm. Each arm then optionally runs stage 1 and always runs
    stage 2, and is evaluated on the held-out split. The stage-2 start caption
    loss is measured right before stage 2.
    """
    start = time.perf_counter()
    data = data if data is not None else generate_all(cfg.data, cfg.data_seed)
    captions, train, test = data[CAPTION_SPLIT], data[TRAIN_SPLIT], data[TEST_SPLIT]
    probe = captions[:cfg.ablation.caption_probe_samples]

    dual_config = cfg.model.model_copy(update={"branches": [BRANCH_QUERY, BRANCH_PATCH]})
    shared = BlivaModel(dual_config, cfg.seed)
    shared_groups = [GROUP_LM]
    if cfg.lm_pretrain.enabled:
        pretrain_lm(shared, captions, cfg, metrics_log)
    if cfg.encoder_pretrain.enabled:
        pretrain_encoder(shared, captions, cfg, metrics_log)
        shared_groups.append(GROUP_ENCODER)

    results: List[ArmResult] = []
    for name, branches, mode, with_stage1 in ARMS:
        logger.info("Ablation arm %s (%s)", name, mode)
        model = BlivaModel(cfg.model.model_copy(update={"branches": branches}), cfg.seed)
        copy_groups(shared, model, shared_groups)
        losses: Dict[str, List[float]] = {}
        if with_stage1:
            losses["stage1"] = train_stage1(model, captions, cfg, metrics_log).losses
        start_loss = mean_caption_loss(model, probe, mode)
        stage2 = train_stage2(model, train, cfg, mode=mode, metrics_log=metrics_log)
        losses["stage2"] = stage2.losses
        report = evaluate(model, test, mode, cfg.eval, split=TEST_SPLIT, seed=cfg.seed,
                          steps=stage2.steps)
        results.append(ArmResult(arm=name, mode=mode, report=report,
                                 stage2_start_caption_loss=start_loss, stage_losses=losses))

    baseline = results[0]
    baseline.improvement = 0.0
    for r in results[1:]:
        r.improvement = relative_improvement(r.report, baseline.report)
    report = AblationReport(seed=cfg.seed, data_seed=cfg.data_seed, baseline=baseline.arm,
                            arms=results, wall_ms=(time.perf_counter() - start) * 1000.0)
    for r in results:
        logger.info("%-20s accuracy %.4f improvement %s", r.arm, r.report.accuracy,
                    "n/a" if r.improvement is None else f"{r.improvement:+.2%}")
    return report
