"""Dense tensor with reverse-mode automatic differentiation."""

import contextlib
import threading
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from autograd.errors import GradientError, ShapeError

# Per-thread engine state: creation dtype and whether ops record a graph.
_state = threading.local()


def default_dtype() -> np.dtype:
    """Return the dtype new tensors are created with (float32 unless in 64-bit mode)."""
    return getattr(_state, "dtype", np.dtype(np.float32))


def grad_enabled() -> bool:
    """Return True when ops record the computation graph."""
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """
    Temporarily switch the creation dtype.

    Args:
        dtype: np.float32 for training, np.float64 for gradient checking
    """
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"Unsupported precision: {dtype}")
    previous = default_dtype()
    _state.dtype = dtype
    try:
        yield
    finally:
        _state.dtype = previous


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording a graph."""
    previous = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


# A backward closure maps the output gradient to one gradient per parent
# (None where a parent receives nothing).
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """n-dimensional float array with an optional gradient and graph backpointer."""

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None,
                 dtype=None):
        """
        Create a tensor.

        Args:
            data: array-like values; copied into a C-contiguous array
            requires_grad: whether backward() should populate grad
            name: optional parameter name used in error messages
            dtype: explicit dtype; defaults to the current precision mode
        """
        self.data = np.array(data, dtype=dtype or default_dtype(), order="C")
        if any(extent <= 0 for extent in self.data.shape):
            raise ShapeError(f"Tensor extents must be positive, got {self.data.shape}")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = ""

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"],
                 backward: BackwardFn, op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = np.ascontiguousarray(data)
        out.grad = None
        out.name = None
        out._op = op
        if grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"Expected a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f"{self.name}, " if self.name else ""
        return f"Tensor({label}shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; implementations live in autograd.ops.
    def __add__(self, other):
        from autograd import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from autograd import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from autograd import ops
        return ops.add(ops.neg(self), other)

    def __mul__(self, other):
        from autograd import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from autograd import ops
        if isinstance(other, Tensor):
            raise TypeError("Division is only supported by a scalar")
        return ops.mul(self, 1.0 / float(other))

    def __neg__(self):
        from autograd import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from autograd import ops
        return ops.matmul(self, other)

    @property
    def T(self) -> "Tensor":
        from autograd import ops
        return ops.transpose(self)


def _topological_order(root: Tensor) -> List[Tensor]:
    # Iterative DFS; transformer graphs are deep enough to exhaust recursion.
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """
    Populate grad on every requires_grad leaf reachable from loss.

    Gradients accumulate (+=) into leaves across repeated calls; intermediate
    gradients live only for the duration of one call.

    Args:
        loss: single-element tensor produced by a recorded graph

    Raises:
        ShapeError: If loss is not a scalar
        GradientError: If loss is not attached to a graph
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GradientError("backward() called on a tensor that is not on a graph")

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            if node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
