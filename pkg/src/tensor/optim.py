"""Adam optimizer over named parameters."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from src.tensor.graph import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moment buffers (float64) and the shared step counter."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"Adam learning rate must be > 0, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"Adam betas must be in [0, 1), got {self.beta1}, {self.beta2}")


def adam_step(
    params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamState
) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    missing = sorted(name for name in params if name not in grads)
    if missing:
        raise ValueError(f"adam_step: no gradient for parameters {missing}")
    for name, param in params.items():
        if grads[name].shape != param.shape:
            raise ValueError(
                f"adam_step: gradient shape {grads[name].shape} for {name!r} "
                f"does not match parameter shape {param.shape}"
            )

    state.t += 1
    correction1 = 1 - state.beta1**state.t
    correction2 = 1 - state.beta2**state.t
    for name, param in params.items():
        grad = grads[name].astype(np.float64)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None or v is None:
            m = np.zeros(param.shape, dtype=np.float64)
            v = np.zeros(param.shape, dtype=np.float64)
        m = state.beta1 * m + (1 - state.beta1) * grad
        v = state.beta2 * v + (1 - state.beta2) * grad * grad
        state.m[name] = m
        state.v[name] = v
        m_hat = m / correction1
        v_hat = v / correction2
        update = state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        param.data = (param.data.astype(np.float64) - update).astype(param.dtype)
    logger.debug("Adam step %d over %d parameters", state.t, len(params))
    return state
