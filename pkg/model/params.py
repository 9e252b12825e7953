"""Named parameter store with per-name seeded initialization."""

from collections import OrderedDict
from typing import Dict, Iterable, Iterator, Sequence, Tuple

import numpy as np

from autograd.rng import Rng
from autograd.tensor import Tensor, default_dtype

INIT_STD = 0.02


class ParamStore:
    """
    Ordered name -> Tensor map.

    Every parameter draws from its own substream Rng.for_name(seed, name), so a
    parameter's initial value depends only on (seed, name, shape): models that
    differ in which branches exist still share identical values for the
    parameters they have in common.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.tensors: "OrderedDict[str, Tensor]" = OrderedDict()

    def _add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.tensors:
            raise KeyError(f"Duplicate parameter name {name}")
        t = Tensor(data, requires_grad=True, name=name, dtype=default_dtype())
        self.tensors[name] = t
        return t

    def normal(self, name: str, shape: Sequence[int], std: float = INIT_STD) -> Tensor:
        return self._add(name, Rng.for_name(self.seed, name).normal(tuple(shape), std))

    def zeros(self, name: str, shape: Sequence[int]) -> Tensor:
        return self._add(name, np.zeros(tuple(shape)))

    def ones(self, name: str, shape: Sequence[int]) -> Tensor:
        return self._add(name, np.ones(tuple(shape)))

    def scope(self, prefix: str) -> "ParamScope":
        return ParamScope(self, prefix)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self.tensors.items())

    def names(self) -> Iterable[str]:
        return self.tensors.keys()


class ParamScope:
    """View of a ParamStore that prefixes every name with "<prefix>."."""

    def __init__(self, store: ParamStore, prefix: str):
        self.store = store
        self.prefix = prefix

    def _name(self, name: str) -> str:
        return f"{self.prefix}.{name}"

    def normal(self, name: str, shape: Sequence[int], std: float = INIT_STD) -> Tensor:
        return self.store.normal(self._name(name), shape, std)

    def zeros(self, name: str, shape: Sequence[int]) -> Tensor:
        return self.store.zeros(self._name(name), shape)

    def ones(self, name: str, shape: Sequence[int]) -> Tensor:
        return self.store.ones(self._name(name), shape)

    def scope(self, prefix: str) -> "ParamScope":
        return ParamScope(self.store, self._name(prefix))


def snapshot(tensors: Dict[str, Tensor]) -> Dict[str, bytes]:
    """Raw bytes of every parameter, for bitwise freeze checks."""
    return {name: t.data.tobytes() for name, t in tensors.items()}
