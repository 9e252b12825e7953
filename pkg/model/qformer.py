"""Learned-query branch: instruction-aware self-attention plus cross-attention into patches."""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from autograd import ops
from autograd.tensor import Tensor
from config.run_config import QFormerConfig
from model.errors import ModelConfigError, SequenceLengthError
from model.layers import FeedForward, LayerNorm, MultiHeadAttention
from model.params import ParamScope, ParamStore

AttentionRecord = Dict[str, List[np.ndarray]]


class QFormerBlock:
    def __init__(self, scope: ParamScope, d_q: int, d_v: int, heads: int):
        self.ln_self = LayerNorm(scope, "ln_self", d_q)
        self.self_attn = MultiHeadAttention(scope, "self_attn", d_q, heads)
        self.ln_cross = LayerNorm(scope, "ln_cross", d_q)
        self.cross_attn = MultiHeadAttention(scope, "cross_attn", d_q, heads, d_kv_in=d_v)
        self.ln_ffn = LayerNorm(scope, "ln_ffn", d_q)
        self.ffn = FeedForward(scope, "ffn", d_q)

    def __call__(self, queries: Tensor, instruction: Optional[Tensor], patches: Tensor,
                 record: Optional[AttentionRecord] = None) -> Tuple[Tensor, Optional[Tensor]]:
        k = queries.shape[0]
        h = ops.concat([queries, instruction], axis=0) if instruction is not None else queries
        hn = self.ln_self(h)
        h = ops.add(h, self.self_attn(hn, hn, record=None if record is None else record["self"]))
        queries = ops.slice_axis(h, 0, 0, k)
        if instruction is not None:
            instruction = ops.slice_axis(h, 0, k, h.shape[0])
        cross = self.cross_attn(self.ln_cross(queries), patches,
                                record=None if record is None else record["cross"])
        queries = ops.add(queries, cross)
        queries = ops.add(queries, self.ffn(self.ln_ffn(queries)))
        return queries, instruction


class QFormer:
    """
    K trainable queries refined per block by

    1. self-attention over [queries ; instruction tokens] (instruction rows attend
       too, but only query rows go on),
    2. cross-attention from queries into layer-normed patch features,
    3. a feed-forward layer.

    Instruction tokens use the LM's ids but a separate embedding table.
    """

    def __init__(self, cfg: QFormerConfig, d_v: int, vocab_size: int, store: ParamStore):
        self.cfg = cfg
        scope = store.scope("qformer")
        self.queries = scope.normal("queries", (cfg.num_queries, cfg.d_q))
        self.instr_embed = scope.normal("instr_embed", (vocab_size, cfg.d_q))
        self.instr_pos = scope.normal("instr_pos", (cfg.max_instruction, cfg.d_q))
        self.ln_vision = LayerNorm(scope, "ln_vision", d_v)
        self.blocks = [QFormerBlock(scope.scope(f"blocks.{i}"), cfg.d_q, d_v, cfg.heads)
                       for i in range(cfg.depth)]
        self.ln_out = LayerNorm(scope, "ln_out", cfg.d_q)

    def _instruction(self, instruction_ids: Sequence[int]) -> Optional[Tensor]:
        if not self.cfg.instruction_aware or len(instruction_ids) == 0:
            return None
        n = len(instruction_ids)
        if n > self.cfg.max_instruction:
            raise SequenceLengthError(f"instruction length {n} exceeds "
                                      f"max_instruction {self.cfg.max_instruction}")
        return ops.add(ops.embedding_lookup(self.instr_embed, instruction_ids),
                       ops.slice_axis(self.instr_pos, 0, 0, n))

    def forward(self, patch_feats: Optional[Tensor], instruction_ids: Sequence[int],
                record: Optional[AttentionRecord] = None) -> Tensor:
        """
        Args:
            patch_feats: [N, d_v] encoder features
            instruction_ids: question token ids (ignored when not instruction-aware)
            record: optional {"self": [...], "cross": [...]} to collect attention weights

        Returns:
            [K, d_q] query states

        Raises:
            ModelConfigError: If patch_feats is missing or empty
        """
        if patch_feats is None or patch_feats.data.size == 0:
            raise ModelConfigError("qformer_forward: no patch features given")
        patches = self.ln_vision(patch_feats)
        queries = self.queries
        instruction = self._instruction(instruction_ids)
        for block in self.blocks:
            queries, instruction = block(queries, instruction, patches, record)
        return self.ln_out(queries)

    __call__ = forward


def new_attention_record() -> AttentionRecord:
    return {"self": [], "cross": []}
