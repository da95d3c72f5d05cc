"""Adam optimizer with bias correction, operating in-place on Tensor leaves."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr=1e-4, beta1=0.5, beta2=0.999, eps=1e-8):
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=0,
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adam_step(state, params, grads):
    """One Adam update: theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).

    Mutates the parameter tensors and the state.  A non-finite gradient skips
    the whole step (moments, counter and parameters untouched) and returns
    False; otherwise returns True.
    """
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError(
            f"adam_step: got {len(grads)} gradients for {len(params)} parameters "
            f"with {len(state.m)} moment slots"
        )
    for p, g in zip(params, grads):
        if g.shape != p.data.shape:
            raise ValueError(f"adam_step: gradient shape {g.shape} vs parameter {p.data.shape}")
    if any(not np.all(np.isfinite(g)) for g in grads):
        log.warning("adam_step: non-finite gradient at t=%d, step skipped", state.t)
        return False
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for m, v, p, g in zip(state.m, state.v, params, grads):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return True
