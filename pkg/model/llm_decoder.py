"""Frozen decoder-only LM over [BOS + question ; visual queries ; visual patches ; answer]."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from autograd import ops
from autograd.tensor import Tensor, no_grad
from config.app_config import BOS_ID, EOS_ID
from config.run_config import LMConfig
from model.errors import ModelConfigError, SequenceLengthError
from model.layers import LayerNorm, Linear, TransformerBlock
from model.params import ParamStore

logger = logging.getLogger(__name__)

SEG_QUESTION = "question"
SEG_VISUAL_QUERY = "visual_query"
SEG_VISUAL_PATCH = "visual_patch"
SEG_ANSWER = "answer"


class LanguageModel:
    """Token/position embeddings, causal pre-norm blocks, final norm and output head."""

    def __init__(self, cfg: LMConfig, store: ParamStore):
        self.cfg = cfg
        scope = store.scope("lm")
        self.embed = scope.normal("embed", (cfg.vocab_size, cfg.d_llm))
        self.pos = scope.normal("pos", (cfg.max_seq, cfg.d_llm))
        self.blocks = [TransformerBlock(scope.scope(f"blocks.{i}"), cfg.d_llm, cfg.heads)
                       for i in range(cfg.depth)]
        self.ln_f = LayerNorm(scope, "ln_f", cfg.d_llm)
        self.head = Linear(scope, "head", cfg.d_llm, cfg.vocab_size)


@dataclass
class AssembledInput:
    """Embedded LM input with a per-position segment tag and answer-only loss mask."""

    embeddings: Tensor
    segments: List[str]
    loss_mask: List[bool]
    answer_ids: List[int] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.segments)

    def answer_start(self) -> int:
        return self.length - len(self.answer_ids)


def assemble_input(lm: LanguageModel, question_ids: Sequence[int], vq: Optional[Tensor],
                   vp: Optional[Tensor], answer_ids: Sequence[int]) -> AssembledInput:
    """
    Lay out BOS + question tokens, query prompts, patch prompts, then answer tokens.

    Args:
        lm: language model whose token table embeds the text
        question_ids: question tokens (BOS is prepended here)
        vq: [K, d_llm] projected query outputs, or None
        vp: [N, d_llm] projected patch features, or None
        answer_ids: answer tokens (may be empty for generation)

    Raises:
        ModelConfigError: If a visual block has the wrong width
        SequenceLengthError: If the total length exceeds max_seq
    """
    d = lm.cfg.d_llm
    parts = [ops.embedding_lookup(lm.embed, [BOS_ID] + list(question_ids))]
    segments = [SEG_QUESTION] * (len(question_ids) + 1)
    for block, tag in ((vq, SEG_VISUAL_QUERY), (vp, SEG_VISUAL_PATCH)):
        if block is None:
            continue
        if block.data.ndim != 2 or block.shape[1] != d:
            raise ModelConfigError(f"{tag} block has shape {block.shape}, expected [*, {d}]")
        parts.append(block)
        segments += [tag] * block.shape[0]
    if answer_ids:
        parts.append(ops.embedding_lookup(lm.embed, list(answer_ids)))
        segments += [SEG_ANSWER] * len(answer_ids)
    if len(segments) > lm.cfg.max_seq:
        raise SequenceLengthError(f"assembled length {len(segments)} exceeds "
                                  f"max_seq {lm.cfg.max_seq}")
    return AssembledInput(embeddings=ops.concat(parts, axis=0), segments=segments,
                          loss_mask=[s == SEG_ANSWER for s in segments],
                          answer_ids=list(answer_ids))


def lm_forward(lm: LanguageModel, a: AssembledInput) -> Tensor:
    """Causal LM over the assembled sequence; returns [T, V] logits."""
    x = ops.add(a.embeddings, ops.slice_axis(lm.pos, 0, 0, a.length))
    for block in lm.blocks:
        x = block(x, causal=True)
    return lm.head(lm.ln_f(x))


def lm_loss(lm: LanguageModel, a: AssembledInput, answer_ids: Sequence[int]) -> Tensor:
    """
    Mean next-token cross-entropy over the answer positions only.

    The logit row before each answer position predicts that position's token.

    Raises:
        ValueError: If the answer is empty or does not match the assembled answer
    """
    if not answer_ids:
        raise ValueError("lm_loss: empty answer")
    if list(answer_ids) != a.answer_ids:
        raise ValueError("lm_loss: answer ids do not match the assembled input")
    start = a.answer_start()
    logits = lm_forward(lm, a)
    predicting = ops.slice_axis(logits, 0, start - 1, start - 1 + len(answer_ids))
    return ops.cross_entropy(predicting, list(answer_ids))


def _log_softmax_np(logits: np.ndarray) -> np.ndarray:
    z = logits.astype(np.float64) - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def score_candidate(lm: LanguageModel, question_ids: Sequence[int], vq: Optional[Tensor],
                    vp: Optional[Tensor], candidate_ids: Sequence[int],
                    length_normalize: bool = False) -> float:
    """
    Sum of candidate token log-probabilities under the assembled context.

    Args:
        length_normalize: divide the sum by the candidate length

    Raises:
        ValueError: If the candidate is empty
        SequenceLengthError: If context + candidate exceeds max_seq
    """
    if not candidate_ids:
        raise ValueError("score_candidate: empty candidate")
    with no_grad():
        a = assemble_input(lm, question_ids, vq, vp, candidate_ids)
        logp = _log_softmax_np(lm_forward(lm, a).data)
    start = a.answer_start()
    rows = np.arange(start - 1, start - 1 + len(candidate_ids))
    total = float(logp[rows, np.asarray(candidate_ids)].sum())
    return total / len(candidate_ids) if length_normalize else total


def candidate_scores(lm: LanguageModel, question_ids: Sequence[int], vq: Optional[Tensor],
                     vp: Optional[Tensor], candidates: Sequence[Sequence[int]],
                     length_normalize: bool = False) -> List[float]:
    return [score_candidate(lm, question_ids, vq, vp, c, length_normalize) for c in candidates]


def rank_candidates(lm: LanguageModel, question_ids: Sequence[int], vq: Optional[Tensor],
                    vp: Optional[Tensor], candidates: Sequence[Sequence[int]],
                    length_normalize: bool = False) -> int:
    """
    Index of the highest-scoring candidate; ties go to the lowest index.

    Raises:
        ValueError: If there are no candidates
    """
    if not candidates:
        raise ValueError("rank_candidates: empty candidate list")
    scores = candidate_scores(lm, question_ids, vq, vp, candidates, length_normalize)
    return int(np.argmax(np.asarray(scores)))


def next_token_logprobs(lm: LanguageModel, question_ids: Sequence[int], vq: Optional[Tensor],
                        vp: Optional[Tensor], prefix: Sequence[int]) -> np.ndarray:
    """Log-probabilities of the token following prefix, float64 [V]."""
    with no_grad():
        a = assemble_input(lm, question_ids, vq, vp, prefix)
        logits = lm_forward(lm, a).data[-1]
    return _log_softmax_np(logits[None, :])[0]


def greedy_decode(lm: LanguageModel, question_ids: Sequence[int], vq: Optional[Tensor],
                  vp: Optional[Tensor], max_len: int) -> List[int]:
    """Pick the argmax token (lowest id on ties) until EOS or max_len tokens."""
    tokens: List[int] = []
    while len(tokens) < max_len:
        token = int(np.argmax(next_token_logprobs(lm, question_ids, vq, vp, tokens)))
        tokens.append(token)
        if token == EOS_ID:
            break
    return tokens


@dataclass
class BeamResult:
    tokens: List[int]
    score: float
    finished: bool
    history: List[List[Tuple[Tuple[int, ...], float]]]


def beam_search(lm: LanguageModel, question_ids: Sequence[int], vq: Optional[Tensor],
                vp: Optional[Tensor], beam_width: int, max_len: int) -> BeamResult:
    """
    Length-wise beam search over summed log-probabilities.

    Each step ranks every one-token extension of every live hypothesis by
    (score desc, token id asc, parent rank asc) and keeps the top beam_width.
    Extensions ending in EOS are finalized and leave the beam. The result is the
    best finalized hypothesis (earlier finalization wins ties), or the best
    partial one if none finished within max_len tokens.

    Raises:
        ValueError: If beam_width or max_len < 1
    """
    if beam_width < 1 or max_len < 1:
        raise ValueError(f"beam_search: beam_width={beam_width}, max_len={max_len}")
    live: List[Tuple[List[int], float]] = [([], 0.0)]
    finished: List[Tuple[List[int], float]] = []
    history: List[List[Tuple[Tuple[int, ...], float]]] = []

    for _ in range(max_len):
        extensions = []
        for parent, (tokens, score) in enumerate(live):
            logp = next_token_logprobs(lm, question_ids, vq, vp, tokens)
            for token in range(logp.shape[0]):
                extensions.append((score + float(logp[token]), token, parent))
        extensions.sort(key=lambda e: (-e[0], e[1], e[2]))
        chosen = extensions[:beam_width]
        history.append([(tuple(live[p][0] + [t]), s) for s, t, p in chosen])
        next_live = []
        for score, token, parent in chosen:
            tokens = live[parent][0] + [token]
            if token == EOS_ID:
                finished.append((tokens, score))
            else:
                next_live.append((tokens, score))
        live = next_live
        if not live:
            break

    pool, done = (finished, True) if finished else (live, False)
    best_tokens, best_score = pool[0]
    for tokens, score in pool[1:]:
        if score > best_score:
            best_tokens, best_score = tokens, score
    logger.debug("beam_search: %d finished, best score %.4f", len(finished), best_score)
    return BeamResult(tokens=best_tokens, score=best_score, finished=done, history=history)
