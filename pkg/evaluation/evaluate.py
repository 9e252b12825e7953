"""Top-1 ranking accuracy and caption decoding metrics over a sample set."""

import logging
import time
from collections import defaultdict
from typing import Dict, List, Optional, Sequence

import numpy as np

from autograd.tensor import no_grad
from config.run_config import EvalConfig
from model import llm_decoder
from model.bliva import BlivaModel
from synth.preprocess import preprocess_eval
from synth.samples import Sample
from synth.vocab import DEFAULT_VOCAB, Vocab
from evaluation.report import EvalReport, SampleScore
from training.errors import EmptyDatasetError

logger = logging.getLogger(__name__)


def token_accuracy(predicted: Sequence[int], target: Sequence[int]) -> float:
    """Fraction of target positions whose token the prediction reproduces."""
    hits = sum(1 for p, t in zip(predicted, target) if p == t)
    return hits / len(target)


def evaluate(model: BlivaModel, samples: Sequence[Sample], mode: str,
             cfg: Optional[EvalConfig] = None, split: str = "test", seed: int = 0,
             checkpoint_id: Optional[str] = None, steps: int = 0,
             vocab: Vocab = DEFAULT_VOCAB) -> EvalReport:
    """
    Evaluate a model in one mode.

    Samples with candidates are scored by vocabulary ranking (top-1 accuracy).
    Samples without candidates (captions) are decoded by beam search and
    count as correct on exact match.

    Raises:
        ModeError: If the model lacks a branch the mode needs
        EmptyDatasetError: If there is nothing to evaluate
    """
    cfg = cfg or EvalConfig()
    model.check_mode(mode)
    if cfg.max_samples is not None:
        samples = samples[:cfg.max_samples]
    if not samples:
        raise EmptyDatasetError("evaluate: no samples")

    start = time.perf_counter()
    size = model.config.encoder.image_size
    scores: List[SampleScore] = []
    by_kind: Dict[str, List[bool]] = defaultdict(list)
    token_accs: List[float] = []
    with no_grad():
        for s in samples:
            feats = model.encode_image(preprocess_eval(s.image, size))
            vq, vp = model.visual_prompts(feats, s.question_ids, mode)
            a = llm_decoder.assemble_input(model.lm, s.question_ids, vq, vp, s.answer_ids)
            answer_loss = llm_decoder.lm_loss(model.lm, a, s.answer_ids).item()
            if s.candidates is not None:
                predicted = llm_decoder.rank_candidates(model.lm, s.question_ids, vq, vp,
                                                        s.candidates, cfg.length_normalize)
                target = s.target_index
                score = SampleScore(id=s.id, kind=s.kind, correct=predicted == target,
                                    answer_loss=answer_loss, predicted=predicted, target=target)
            else:
                result = llm_decoder.beam_search(model.lm, s.question_ids, vq, vp,
                                                 cfg.beam_width, cfg.max_len)
                token_accs.append(token_accuracy(result.tokens, s.answer_ids))
                score = SampleScore(id=s.id, kind=s.kind,
                                    correct=list(result.tokens) == list(s.answer_ids),
                                    answer_loss=answer_loss, decoded=vocab.decode(result.tokens))
            scores.append(score)
            by_kind[s.kind].append(score.correct)

    per_kind = {kind: float(np.mean(hits)) for kind, hits in sorted(by_kind.items())}
    captions = [sc.correct for sc in scores if sc.decoded is not None]
    report = EvalReport(
        mode=mode,
        split=split,
        n_samples=len(scores),
        accuracy=float(np.mean([sc.correct for sc in scores])),
        mean_answer_loss=float(np.mean([sc.answer_loss for sc in scores])),
        per_kind=per_kind,
        seed=seed,
        checkpoint_id=checkpoint_id,
        steps=steps,
        caption_exact_match=float(np.mean(captions)) if captions else None,
        caption_token_accuracy=float(np.mean(token_accs)) if token_accs else None,
        per_sample=scores,
        wall_ms=(time.perf_counter() - start) * 1000.0,
    )
    logger.info("eval %s/%s: accuracy %.4f over %d samples", mode, split, report.accuracy,
                report.n_samples)
    return report


def mean_caption_loss(model: BlivaModel, captions: Sequence[Sample], mode: str) -> float:
    """Mean LM loss of captions given the image (empty question) in a mode."""
    if not captions:
        raise EmptyDatasetError("mean_caption_loss: no captions")
    model.check_mode(mode)
    size = model.config.encoder.image_size
    with no_grad():
        losses = [model.loss(model.encode_image(preprocess_eval(c.image, size)), [],
                             c.answer_ids, mode).item() for c in captions]
    return float(np.mean(losses))
