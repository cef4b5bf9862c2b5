"""RAdam with a linear warmup schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RHO_THRESHOLD = 4.0


@dataclass
class RAdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def rho(t: int, beta2: float) -> tuple[float, float]:
    """(rho_inf, rho_t): the maximum and step-t length of the approximated SMA."""
    rho_inf = 2.0 / (1.0 - beta2) - 1.0
    b2t = beta2 ** t
    return rho_inf, rho_inf - 2.0 * t * b2t / (1.0 - b2t)


def radam_step(params: dict, grads: dict, state: RAdamState, lr: float,
               betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> bool:
    """Update ``params`` and ``state`` in place for step ``state.t + 1``.

    Returns True when the variance-rectified branch was used, False for the
    bias-corrected momentum step taken while rho_t <= 4.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
    b1, b2 = betas
    state.t += 1
    t = state.t
    rho_inf, rho_t = rho(t, b2)
    rectified = rho_t > RHO_THRESHOLD
    if rectified:
        r = math.sqrt((rho_t - 4) * (rho_t - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho_t))
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name, g in grads.items():
        w = params[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(w)
            state.v[name] = np.zeros_like(w)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bc1
        if rectified:
            w -= (lr * r * m_hat * math.sqrt(bc2) / (np.sqrt(v) + eps)).astype(w.dtype)
        else:
            w -= (lr * m_hat).astype(w.dtype)
    return rectified


def lr_schedule(step: int, ws: int, peak_lr: float) -> float:
    """Linear ramp to ``peak_lr`` over ``ws`` steps, then constant."""
    if step < 1:
        raise ValueError("step counts from 1")
    if ws <= 0 or step >= ws:
        return peak_lr
    return peak_lr * step / ws
