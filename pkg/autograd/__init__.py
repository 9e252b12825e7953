"""Minimal dense-tensor engine with reverse-mode automatic differentiation."""

from autograd.errors import GradientError, ShapeError
from autograd.gradcheck import grad_check
from autograd.ops import (concat, cross_entropy, embedding_lookup, gelu, layer_norm,
                          log_softmax, matmul, softmax)
from autograd.rng import Rng, derive_seed, rng_next
from autograd.tensor import Tensor, backward, default_dtype, no_grad, precision

__all__ = [
    "Tensor", "backward", "no_grad", "precision", "default_dtype",
    "matmul", "softmax", "log_softmax", "layer_norm", "gelu", "embedding_lookup",
    "concat", "cross_entropy", "grad_check",
    "Rng", "rng_next", "derive_seed",
    "ShapeError", "GradientError",
]
