"""Differentiable ops over Tensor.

Every op validates shapes up front and raises ShapeError naming the operands.
Broadcasting is limited to adding a 1-D bias along the last axis.
"""

import math
from typing import List, Sequence, Union

import numpy as np

from autograd.errors import ShapeError
from autograd.tensor import Tensor

Scalar = Union[int, float]

GELU_COEFF = 0.044715
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _as_scalar(value) -> float:
    if isinstance(value, (int, float, np.floating, np.integer)):
        return float(value)
    raise TypeError(f"Expected Tensor or scalar, got {type(value).__name__}")


def _sum_to_bias(g: np.ndarray) -> np.ndarray:
    return g.reshape(-1, g.shape[-1]).sum(axis=0)


def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    """
    Elementwise sum; b may be a same-shape tensor, a last-axis bias, or a scalar.

    Raises:
        ShapeError: If b is neither same-shape nor a matching bias vector
    """
    if not isinstance(b, Tensor):
        c = _as_scalar(b)
        return Tensor._from_op(a.data + c, (a,), lambda g: (g,), "add_scalar")
    if a.shape == b.shape:
        return Tensor._from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")
    if b.data.ndim == 1 and a.data.ndim >= 1 and a.shape[-1] == b.shape[0]:
        return Tensor._from_op(a.data + b.data, (a, b),
                               lambda g: (g, _sum_to_bias(g)), "add_bias")
    raise ShapeError(f"add: cannot combine shapes {a.shape} and {b.shape}")


def neg(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,), "neg")


def sub(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if isinstance(b, Tensor):
        return add(a, neg(b))
    return add(a, -_as_scalar(b))


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    """Elementwise product with a same-shape tensor or a scalar."""
    if not isinstance(b, Tensor):
        c = _as_scalar(b)
        return Tensor._from_op(a.data * c, (a,), lambda g: (g * c,), "mul_scalar")
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    a_data, b_data = a.data, b.data
    return Tensor._from_op(a_data * b_data, (a, b),
                           lambda g: (g * b_data, g * a_data), "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product of two 2-D tensors.

    Raises:
        ShapeError: If either operand is not 2-D or inner extents differ
    """
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: dimension mismatch between {a.shape} and {b.shape}")
    a_data, b_data = a.data, b.data

    def _backward(g):
        return g @ b_data.T, a_data.T @ g

    return Tensor._from_op(a_data @ b_data, (a, b), _backward, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected 2-D tensor, got {a.shape}")
    return Tensor._from_op(a.data.T, (a,), lambda g: (g.T,), "transpose")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape)) != a.data.size:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")
    original = a.shape
    return Tensor._from_op(a.data.reshape(shape), (a,),
                           lambda g: (g.reshape(original),), "reshape")


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """
    Take the half-open range [start, stop) along one axis.

    Raises:
        ShapeError: If the range is empty or out of bounds
    """
    axis = axis % a.data.ndim
    extent = a.shape[axis]
    if not 0 <= start < stop <= extent:
        raise ShapeError(f"slice: range [{start}, {stop}) invalid for axis {axis} of {a.shape}")
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def _backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return Tensor._from_op(a.data[index], (a,), _backward, "slice")


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    """
    Join tensors along an axis.

    Args:
        parts: non-empty list of tensors with equal off-axis extents
        axis: axis to join along

    Returns:
        The joined tensor; a single part is returned unchanged

    Raises:
        ShapeError: If parts is empty or off-axis extents differ
    """
    if not parts:
        raise ShapeError("concat: no tensors given")
    if len(parts) == 1:
        return parts[0]
    ndim = parts[0].data.ndim
    axis = axis % ndim
    for p in parts:
        off = [e for i, e in enumerate(p.shape) if i != axis]
        ref = [e for i, e in enumerate(parts[0].shape) if i != axis]
        if p.data.ndim != ndim or off != ref:
            raise ShapeError(f"concat: shape {p.shape} does not match {parts[0].shape} "
                             f"off axis {axis}")
    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])

    def _backward(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(parts)))

    data = np.concatenate([p.data for p in parts], axis=axis)
    return Tensor._from_op(data, tuple(parts), _backward, "concat")


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return Tensor._from_op(np.array(a.data.sum(), dtype=a.data.dtype), (a,),
                           lambda g: (np.broadcast_to(g, shape).copy(),), "sum")


def masked_fill(a: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where mask is True with a constant; no gradient flows there."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise ShapeError(f"masked_fill: mask {mask.shape} does not match {a.shape}")
    return Tensor._from_op(np.where(mask, value, a.data).astype(a.data.dtype), (a,),
                           lambda g: (np.where(mask, 0.0, g).astype(g.dtype),), "masked_fill")


def _check_last_axis(a: Tensor, op: str) -> None:
    if a.data.ndim == 0 or a.shape[-1] == 0:
        raise ShapeError(f"{op}: needs a non-empty last axis, got {a.shape}")


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    _check_last_axis(a, "softmax")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def _backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return Tensor._from_op(y, (a,), _backward, "softmax")


def log_softmax(a: Tensor) -> Tensor:
    _check_last_axis(a, "log_softmax")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    p = np.exp(out)

    def _backward(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return Tensor._from_op(out, (a,), _backward, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """
    Normalize each last-axis slice to zero mean and unit population variance.

    Raises:
        ShapeError: If gain or bias do not match the last axis
    """
    _check_last_axis(x, "layer_norm")
    n = x.shape[-1]
    if gain.shape != (n,) or bias.shape != (n,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} "
                         f"do not match last axis of {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    gain_data = gain.data

    def _backward(g):
        dxhat = g * gain_data
        dx = inv_std / n * (n * dxhat
                            - dxhat.sum(axis=-1, keepdims=True)
                            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        return dx, _sum_to_bias(g * xhat), _sum_to_bias(g)

    return Tensor._from_op(xhat * gain_data + bias.data, (x, gain, bias), _backward, "layer_norm")


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    d = x.data
    t = np.tanh(_SQRT_2_OVER_PI * (d + GELU_COEFF * d ** 3))

    def _backward(g):
        du = _SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_COEFF * d * d)
        return (g * (0.5 * (1.0 + t) + 0.5 * d * (1.0 - t * t) * du),)

    return Tensor._from_op(0.5 * d * (1.0 + t), (x,), _backward, "gelu")


def embedding_lookup(table: Tensor, ids: Sequence[int]) -> Tensor:
    """
    Gather rows of a [V, d] table.

    Raises:
        IndexError: If any id lies outside [0, V)
        ShapeError: If ids is empty or table is not 2-D
    """
    if table.data.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-D, got {table.shape}")
    if len(ids) == 0:
        raise ShapeError("embedding_lookup: empty id list")
    vocab = table.shape[0]
    for i in ids:
        if not 0 <= int(i) < vocab:
            raise IndexError(f"embedding_lookup: id {i} out of range [0, {vocab})")
    index = np.asarray(ids, dtype=np.int64)

    def _backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, index, g)
        return (full,)

    return Tensor._from_op(table.data[index], (table,), _backward, "embedding")


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """
    Mean negative log-softmax probability of the targets.

    Args:
        logits: [n, V] scores
        targets: n class ids

    Raises:
        ValueError: If targets is empty
        ShapeError: If the target count does not match the rows
        IndexError: If a target is out of range
    """
    if len(targets) == 0:
        raise ValueError("cross_entropy: empty target list")
    if logits.data.ndim != 2 or logits.shape[0] != len(targets):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs {len(targets)} targets")
    n, vocab = logits.shape
    index = np.asarray(targets, dtype=np.int64)
    if index.min() < 0 or index.max() >= vocab:
        raise IndexError(f"cross_entropy: target out of range [0, {vocab})")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    rows = np.arange(n)
    loss = -logp[rows, index].mean()

    def _backward(g):
        grad = np.exp(logp)
        grad[rows, index] -= 1.0
        return (grad * (g / n),)

    return Tensor._from_op(np.array(loss, dtype=logits.data.dtype), (logits,), _backward,
                           "cross_entropy")


def linear(x: Tensor, weight: Tensor, bias: Tensor = None) -> Tensor:
    """x @ weight + bias for x [n, d_in], weight [d_in, d_out]."""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


def split_columns(a: Tensor, parts: int) -> List[Tensor]:
    """Split the last axis of a 2-D tensor into equal-width column blocks."""
    width = a.shape[-1]
    if width % parts != 0:
        raise ShapeError(f"split_columns: width {width} not divisible by {parts}")
    step = width // parts
    return [slice_axis(a, 1, i * step, (i + 1) * step) for i in range(parts)]
