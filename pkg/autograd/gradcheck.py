"""Central-difference gradient verification."""

from typing import Callable

import numpy as np

from autograd.errors import GradientError
from autograd.tensor import Tensor, backward, no_grad


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """
    Compare backward() against central differences of f at x.

    Args:
        f: function mapping x to a scalar tensor; any other tensors it closes over
            are left untouched
        x: float64 tensor with requires_grad set
        eps: finite-difference step

    Returns:
        Maximum relative error, using max(|a|, |b|, 1e-8) as the denominator

    Raises:
        GradientError: If x is not float64, or any value or gradient is non-finite
    """
    if x.data.dtype != np.float64:
        raise GradientError(f"grad_check needs a float64 tensor, got {x.data.dtype}")
    if not np.all(np.isfinite(x.data)):
        raise GradientError("grad_check: input contains non-finite values")

    saved_grad = x.grad
    x.requires_grad = True
    x.grad = None
    out = f(x)
    if not np.all(np.isfinite(out.data)):
        raise GradientError("grad_check: f(x) is non-finite")
    if out.requires_grad:
        backward(out)
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
    x.grad = saved_grad

    numeric = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    num_flat = numeric.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = f(x).item()
            flat[i] = original - eps
            minus = f(x).item()
            flat[i] = original
            num_flat[i] = (plus - minus) / (2.0 * eps)

    if not (np.all(np.isfinite(analytic)) and np.all(np.isfinite(numeric))):
        raise GradientError("grad_check: non-finite gradient")
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
