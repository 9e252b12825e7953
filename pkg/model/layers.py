"""Transformer building blocks shared by the encoder, Q-Former and LM."""

import math
from typing import List, Optional

import numpy as np

from autograd import ops
from autograd.tensor import Tensor
from model.params import ParamScope

LN_EPS = 1e-5
FFN_MULT = 4


class Linear:
    """Affine map x @ W + b with W stored as [d_in, d_out]."""

    def __init__(self, scope: ParamScope, name: str, d_in: int, d_out: int):
        self.weight = scope.normal(f"{name}.weight", (d_in, d_out))
        self.bias = scope.zeros(f"{name}.bias", (d_out,))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class LayerNorm:
    def __init__(self, scope: ParamScope, name: str, d: int):
        self.gain = scope.ones(f"{name}.gain", (d,))
        self.bias = scope.zeros(f"{name}.bias", (d,))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias, LN_EPS)


def causal_mask(t: int) -> np.ndarray:
    """True where position i would attend to a later position j > i."""
    return np.triu(np.ones((t, t), dtype=bool), k=1)


class MultiHeadAttention:
    """
    Scaled dot-product attention with per-head column blocks.

    Keys/values may come from a different width (d_kv_in), which is how the
    Q-Former cross-attends from d_q queries into d_v patch features.
    """

    def __init__(self, scope: ParamScope, name: str, d_model: int, heads: int,
                 d_kv_in: Optional[int] = None):
        if d_model % heads != 0:
            raise ValueError(f"{name}: width {d_model} not divisible by {heads} heads")
        d_kv_in = d_kv_in or d_model
        self.heads = heads
        self.scale = 1.0 / math.sqrt(d_model // heads)
        self.q = Linear(scope, f"{name}.q", d_model, d_model)
        self.k = Linear(scope, f"{name}.k", d_kv_in, d_model)
        self.v = Linear(scope, f"{name}.v", d_kv_in, d_model)
        self.o = Linear(scope, f"{name}.o", d_model, d_model)

    def __call__(self, x_q: Tensor, x_kv: Tensor, causal: bool = False,
                 record: Optional[List[np.ndarray]] = None) -> Tensor:
        """
        Args:
            x_q: [T_q, d_model] query-side states
            x_kv: [T_kv, d_kv_in] key/value-side states
            causal: mask attention to later positions (requires T_q == T_kv)
            record: if given, each head's attention weights are appended

        Returns:
            [T_q, d_model]
        """
        q_heads = ops.split_columns(self.q(x_q), self.heads)
        k_heads = ops.split_columns(self.k(x_kv), self.heads)
        v_heads = ops.split_columns(self.v(x_kv), self.heads)
        mask = causal_mask(x_q.shape[0]) if causal else None
        outputs = []
        for qh, kh, vh in zip(q_heads, k_heads, v_heads):
            scores = ops.mul(ops.matmul(qh, ops.transpose(kh)), self.scale)
            if mask is not None:
                scores = ops.masked_fill(scores, mask, -np.inf)
            weights = ops.softmax(scores)
            if record is not None:
                record.append(weights.data)
            outputs.append(ops.matmul(weights, vh))
        return self.o(ops.concat(outputs, axis=1))


class FeedForward:
    def __init__(self, scope: ParamScope, name: str, d: int):
        self.fc1 = Linear(scope, f"{name}.fc1", d, FFN_MULT * d)
        self.fc2 = Linear(scope, f"{name}.fc2", FFN_MULT * d, d)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(ops.gelu(self.fc1(x)))


class TransformerBlock:
    """Pre-norm block: x + Attn(LN(x)), then x + FFN(LN(x))."""

    def __init__(self, scope: ParamScope, d: int, heads: int):
        self.ln1 = LayerNorm(scope, "ln1", d)
        self.attn = MultiHeadAttention(scope, "attn", d, heads)
        self.ln2 = LayerNorm(scope, "ln2", d)
        self.ffn = FeedForward(scope, "ffn", d)

    def __call__(self, x: Tensor, causal: bool = False,
                 record: Optional[List[np.ndarray]] = None) -> Tensor:
        h = self.ln1(x)
        x = ops.add(x, self.attn(h, h, causal=causal, record=record))
        return ops.add(x, self.ffn(self.ln2(x)))
