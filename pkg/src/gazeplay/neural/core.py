"""Stateless building blocks shared by the models."""

from __future__ import annotations

from typing import Optional

import numpy as np


class ConfigError(ValueError):
    pass


def causal_mask(seq_len: int) -> np.ndarray:
    """Boolean (L, L) matrix; entry (i, j) is True iff position i may attend to j."""
    if seq_len < 1:
        raise ConfigError("seq_len must be at least 1")
    return np.tril(np.ones((seq_len, seq_len), dtype=bool))


def positional_encoding(length: int, d_model: int) -> np.ndarray:
    """Fixed sinusoidal encodings, float64 (length, d_model)."""
    pos = np.arange(length)[:, None]
    i = np.arange(0, d_model, 2)[None, :]
    angle = pos / np.power(10000.0, i / d_model)
    pe = np.zeros((length, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : d_model // 2])
    return pe


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - np.max(x, axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return xhat * gain + bias, (xhat, inv)


def layer_norm_backward(dy: np.ndarray, gain: np.ndarray, cache):
    xhat, inv = cache
    lead = tuple(range(dy.ndim - 1))
    dgain = (dy * xhat).sum(axis=lead)
    dbias = dy.sum(axis=lead)
    dxhat = dy * gain
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dgain, dbias


def dropout_mask(shape, p: float, rng: Optional[np.random.Generator], dtype) -> Optional[np.ndarray]:
    """Inverted-dropout scale mask, or None when dropout is inactive."""
    if p <= 0.0 or rng is None:
        return None
    keep = rng.random(shape) >= p
    return (keep / (1.0 - p)).astype(dtype)


def cross_entropy(logits: np.ndarray, labels: np.ndarray, mask: Optional[np.ndarray] = None,
                  label_smoothing: float = 0.0) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over unmasked positions and its gradient w.r.t. logits.

    ``logits`` is (..., K); ``labels`` and ``mask`` share its leading shape.
    Masked positions may hold any label value.
    """
    labels = np.asarray(labels)
    if logits.shape[:-1] != labels.shape:
        raise ConfigError(f"logits {logits.shape} do not match labels {labels.shape}")
    mask = np.ones(labels.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != labels.shape:
        raise ConfigError("mask shape differs from labels")
    n = int(mask.sum())
    if n == 0:
        raise ValueError("every position is masked")
    k = logits.shape[-1]
    safe = np.where(mask, labels, 0)
    target = np.zeros(logits.shape, dtype=logits.dtype)
    np.put_along_axis(target, safe[..., None], 1.0, axis=-1)
    if label_smoothing:
        target = target * (1.0 - label_smoothing) + label_smoothing / k
    logp = log_softmax(logits)
    per_pos = -(target * logp).sum(axis=-1)
    loss = float(per_pos[mask].sum() / n)
    grad = (np.exp(logp) - target) * (mask[..., None] / n)
    return loss, grad.astype(logits.dtype)
