"""Projections from each visual branch into the LM embedding space."""

from typing import Optional

from autograd import ops
from autograd.tensor import Tensor
from config.run_config import ConnectorConfig
from model.layers import Linear
from model.params import ParamStore

KIND_LINEAR = "linear"
KIND_MLP = "mlp"


class PatchMLP:
    """d_v -> d_llm -> d_llm with GELU in between."""

    def __init__(self, scope, name: str, d_v: int, d_llm: int):
        self.fc1 = Linear(scope, f"{name}.fc1", d_v, d_llm)
        self.fc2 = Linear(scope, f"{name}.fc2", d_llm, d_llm)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(ops.gelu(self.fc1(x)))


class Connectors:
    """query_proj (d_q -> d_llm) and patch_proj (d_v -> d_llm, linear or MLP)."""

    def __init__(self, cfg: ConnectorConfig, d_q: int, d_v: int, d_llm: int, store: ParamStore,
                 with_query: bool = True, with_patch: bool = True):
        self.kind = cfg.patch_kind
        scope = store.scope("connector")
        self.query_proj: Optional[Linear] = (Linear(scope, "query_proj", d_q, d_llm)
                                             if with_query else None)
        self.patch_proj = None
        if with_patch:
            self.patch_proj = (PatchMLP(scope, "patch_proj", d_v, d_llm) if self.kind == KIND_MLP
                               else Linear(scope, "patch_proj", d_v, d_llm))

    def project_queries(self, q: Tensor) -> Tensor:
        """[K, d_q] -> [K, d_llm]."""
        return self.query_proj(q)

    def project_patches(self, p: Tensor) -> Tensor:
        """[N, d_v] -> [N, d_llm] via the configured kind."""
        return self.patch_proj(p)
