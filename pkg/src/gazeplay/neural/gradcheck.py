"""Central finite-difference verification of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import cross_entropy
from .models import MLP, MLPConfig, ModelConfig, Transformer, param_group


@dataclass
class GradReport:
    max_rel_error: dict  # group -> worst entrywise relative error
    tolerance: float

    @property
    def ok(self) -> bool:
        return all(e < self.tolerance for e in self.max_rel_error.values())

    def failing(self) -> list[str]:
        return [g for g, e in self.max_rel_error.items() if e >= self.tolerance]


def relative_error(a: np.ndarray, n: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """|a - n| / max(|a| + |n|, floor); the floor keeps near-zero entries from dominating."""
    return np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor)


def check_gradients(model, x: np.ndarray, labels: np.ndarray, mask=None, h: float = 1e-5,
                    tolerance: float = 1e-4, train_seed=None) -> GradReport:
    """Compare every parameter entry's analytic gradient with a central difference.

    With ``train_seed`` the forward runs in train mode with dropout masks
    regenerated from that seed on every evaluation, so they stay fixed.
    """
    def run():
        rng = np.random.default_rng(train_seed) if train_seed is not None else None
        return model.forward(x, train=train_seed is not None, rng=rng)

    logits, cache = run()
    _, dlogits = cross_entropy(logits, labels, mask)
    analytic = model.backward(cache, dlogits)
    worst: dict[str, float] = {}
    for name, w in model.params.items():
        numeric = np.zeros_like(w)
        flat, nflat = w.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = cross_entropy(run()[0], labels, mask)[0]
            flat[i] = old - h
            down = cross_entropy(run()[0], labels, mask)[0]
            flat[i] = old
            nflat[i] = (up - down) / (2 * h)
        err = float(relative_error(analytic[name], numeric).max())
        group = param_group(name)
        worst[group] = max(worst.get(group, 0.0), err)
    return GradReport(worst, tolerance)


def grad_check(cfg, tolerance: float = 1e-4, seed: int = 0, batch: int = 2, seq_len: int = 5,
               train_seed=None, h: float = 1e-5) -> GradReport:
    """Gradient check of a freshly initialised 64-bit model on random inputs."""
    rng = np.random.default_rng(seed)
    if isinstance(cfg, ModelConfig):
        model = Transformer(cfg, rng, dtype=np.float64)
        x = rng.normal(size=(batch, seq_len, cfg.input_dim))
        labels = rng.integers(cfg.n_classes, size=(batch, seq_len))
        mask = rng.random((batch, seq_len)) < 0.8
        mask[:, 0] = True
    elif isinstance(cfg, MLPConfig):
        model = MLP(cfg, rng, dtype=np.float64)
        x = rng.normal(size=(batch, cfg.input_dim))
        labels = rng.integers(cfg.n_classes, size=batch)
        mask = None
    else:
        raise TypeError(f"unsupported config {type(cfg).__name__}")
    return check_gradients(model, x, labels, mask, h=h, tolerance=tolerance, train_seed=train_seed)
