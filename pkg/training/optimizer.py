"""AdamW with decoupled weight decay and optional global-norm clipping."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from autograd.tensor import Tensor
from config.app_config import ADAMW_EPS, FULL_SCALE_BETA1, FULL_SCALE_BETA2, FULL_SCALE_WEIGHT_DECAY
from training.errors import NonFiniteGradientError

logger = logging.getLogger(__name__)


@dataclass
class OptimState:
    """First/second moments per trainable parameter plus the shared step counter."""

    beta1: float = FULL_SCALE_BETA1
    beta2: float = FULL_SCALE_BETA2
    eps: float = ADAMW_EPS
    weight_decay: float = FULL_SCALE_WEIGHT_DECAY
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(params: Dict[str, Tensor], state: OptimState, lr: float) -> None:
    """
    One AdamW update of every parameter with requires_grad set.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;  bias-correct;
    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)

    Frozen parameters are skipped and get no moments. A trainable parameter
    without a gradient is updated with g = 0.

    Raises:
        NonFiniteGradientError: If any gradient is NaN/inf (nothing is updated)
    """
    trainable = [(name, p) for name, p in params.items() if p.requires_grad]
    for name, p in trainable:
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradientError(f"Non-finite gradient in parameter {name}")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.t
    correction2 = 1.0 - b2 ** state.t
    for name, p in trainable:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        update = m_hat / (np.sqrt(v_hat) + state.eps) + state.weight_decay * p.data
        p.data = (p.data - lr * update).astype(p.data.dtype)


def global_grad_norm(params: Dict[str, Tensor]) -> float:
    total = 0.0
    for p in params.values():
        if p.requires_grad and p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return math.sqrt(total)


def clip_grad_norm(params: Dict[str, Tensor], max_norm: float) -> float:
    """
    Scale trainable gradients so their global L2 norm is at most max_norm.

    Returns:
        The norm before clipping
    """
    norm = global_grad_norm(params)
    if norm > max_norm > 0.0:
        scale = max_norm / (norm + 1e-12)
        for p in params.values():
            if p.requires_grad and p.grad is not None:
                p.grad = (p.grad * scale).astype(p.grad.dtype)
        logger.debug("Clipped gradient norm %.4f to %.4f", norm, max_norm)
    return norm


def make_state(optim_cfg=None) -> OptimState:
    """OptimState from an OptimConfig (full-scale hyper-parameters when None)."""
    if optim_cfg is None:
        return OptimState()
    return OptimState(beta1=optim_cfg.beta1, beta2=optim_cfg.beta2, eps=optim_cfg.eps,
                      weight_decay=optim_cfg.weight_decay)
