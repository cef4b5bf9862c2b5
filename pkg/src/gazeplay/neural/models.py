"""Causal transformer and MLP with explicit forward and reverse passes."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .core import (
    ConfigError, causal_mask, dropout_mask, layer_norm, layer_norm_backward, positional_encoding,
    softmax,
)

Params = dict[str, np.ndarray]


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    n_classes: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    dropout_p: float = 0.1
    max_seq_len: int = 20

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ConfigError("d_model must be divisible by n_heads")
        if min(self.input_dim, self.n_classes, self.d_model, self.n_layers, self.d_ff,
               self.max_seq_len) < 1:
            raise ConfigError("dimensions must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must lie in [0, 1)")

    def to_json(self) -> dict:
        return asdict(self)


# the large configuration, kept selectable for parity runs
BASE_SIZES = dict(d_model=512, n_layers=6, n_heads=8, d_ff=2048)


@dataclass(frozen=True)
class MLPConfig:
    input_dim: int
    n_classes: int
    hidden: int = 128

    def __post_init__(self):
        if min(self.input_dim, self.n_classes, self.hidden) < 1:
            raise ConfigError("dimensions must be positive")

    def to_json(self) -> dict:
        return asdict(self)


def _uniform(rng, fan_in, shape, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape).astype(dtype)


def _affine_grads(x, dy, grads, w, b):
    grads[w] = x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])
    grads[b] = dy.reshape(-1, dy.shape[-1]).sum(axis=0)


class Transformer:
    """Pre-norm decoder-only encoder: each position sees only itself and earlier positions."""

    kind = "transformer"

    def __init__(self, cfg: ModelConfig, rng: Optional[np.random.Generator] = None,
                 dtype=np.float32, params: Optional[Params] = None):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.pe = positional_encoding(cfg.max_seq_len, cfg.d_model).astype(self.dtype)
        self.params = params if params is not None else self.init_params(cfg, rng, self.dtype)

    @staticmethod
    def init_params(cfg: ModelConfig, rng, dtype) -> Params:
        rng = rng if rng is not None else np.random.default_rng(0)
        d, f = cfg.d_model, cfg.d_ff
        p = {"in.W": _uniform(rng, cfg.input_dim, (cfg.input_dim, d), dtype),
             "in.b": np.zeros(d, dtype)}
        for l in range(cfg.n_layers):
            pre = f"layer{l}."
            p[pre + "ln1.g"] = np.ones(d, dtype)
            p[pre + "ln1.b"] = np.zeros(d, dtype)
            for name in ("q", "k", "v", "o"):
                p[pre + f"attn.W{name}"] = _uniform(rng, d, (d, d), dtype)
                p[pre + f"attn.b{name}"] = np.zeros(d, dtype)
            p[pre + "ln2.g"] = np.ones(d, dtype)
            p[pre + "ln2.b"] = np.zeros(d, dtype)
            p[pre + "ff.W1"] = _uniform(rng, d, (d, f), dtype)
            p[pre + "ff.b1"] = np.zeros(f, dtype)
            p[pre + "ff.W2"] = _uniform(rng, f, (f, d), dtype)
            p[pre + "ff.b2"] = np.zeros(d, dtype)
        p["lnf.g"] = np.ones(d, dtype)
        p["lnf.b"] = np.zeros(d, dtype)
        p["out.W"] = _uniform(rng, d, (d, cfg.n_classes), dtype)
        p["out.b"] = np.zeros(cfg.n_classes, dtype)
        return p

    # -------------------------------------------------------------- forward
    def forward(self, x: np.ndarray, train: bool = False, rng: Optional[np.random.Generator] = None):
        """Logits (B, L, K) for inputs (B, L, input_dim) or (L, input_dim), plus a cache."""
        cfg, p = self.cfg, self.params
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        if x.ndim != 3 or x.shape[-1] != cfg.input_dim:
            raise ConfigError(f"expected (B, L, {cfg.input_dim}) input, got {x.shape}")
        b, L, _ = x.shape
        if L > cfg.max_seq_len:
            raise ConfigError(f"sequence length {L} exceeds max_seq_len {cfg.max_seq_len}")
        drop = cfg.dropout_p if train else 0.0
        rng = rng if train else None
        H, dh = cfg.n_heads, cfg.d_model // cfg.n_heads
        allowed = causal_mask(L)
        cache = {"x": x, "layers": [], "squeeze": squeeze}

        h = x @ p["in.W"] + p["in.b"] + self.pe[:L]
        m = dropout_mask(h.shape, drop, rng, self.dtype)
        cache["drop_in"] = m
        if m is not None:
            h = h * m
        for l in range(cfg.n_layers):
            pre = f"layer{l}."
            c = {}
            a_in, c["ln1"] = layer_norm(h, p[pre + "ln1.g"], p[pre + "ln1.b"])
            c["a_in"] = a_in
            q = (a_in @ p[pre + "attn.Wq"] + p[pre + "attn.bq"]).reshape(b, L, H, dh).transpose(0, 2, 1, 3)
            k = (a_in @ p[pre + "attn.Wk"] + p[pre + "attn.bk"]).reshape(b, L, H, dh).transpose(0, 2, 1, 3)
            v = (a_in @ p[pre + "attn.Wv"] + p[pre + "attn.bv"]).reshape(b, L, H, dh).transpose(0, 2, 1, 3)
            scores = np.where(allowed, (q @ k.transpose(0, 1, 3, 2)) / np.sqrt(dh), -np.inf)
            att = softmax(scores).astype(self.dtype)
            m = dropout_mask(att.shape, drop, rng, self.dtype)
            att_d = att if m is None else att * m
            ctx = (att_d @ v).transpose(0, 2, 1, 3).reshape(b, L, cfg.d_model)
            out = ctx @ p[pre + "attn.Wo"] + p[pre + "attn.bo"]
            m2 = dropout_mask(out.shape, drop, rng, self.dtype)
            if m2 is not None:
                out = out * m2
            c.update(q=q, k=k, v=v, att=att, drop_att=m, att_d=att_d, ctx=ctx, drop_attn_out=m2)
            h = h + out

            f_in, c["ln2"] = layer_norm(h, p[pre + "ln2.g"], p[pre + "ln2.b"])
            u = f_in @ p[pre + "ff.W1"] + p[pre + "ff.b1"]
            r = np.maximum(u, 0)
            f = r @ p[pre + "ff.W2"] + p[pre + "ff.b2"]
            m3 = dropout_mask(f.shape, drop, rng, self.dtype)
            if m3 is not None:
                f = f * m3
            c.update(f_in=f_in, u=u, r=r, drop_ff=m3)
            h = h + f
            cache["layers"].append(c)
        hf, cache["lnf"] = layer_norm(h, p["lnf.g"], p["lnf.b"])
        cache["hf"] = hf
        logits = hf @ p["out.W"] + p["out.b"]
        return (logits[0] if squeeze else logits), cache

    # ------------------------------------------------------------- backward
    def backward(self, cache, dlogits: np.ndarray) -> Params:
        cfg, p = self.cfg, self.params
        if cache["squeeze"]:
            dlogits = dlogits[None]
        dlogits = dlogits.astype(self.dtype)
        g: Params = {}
        _affine_grads(cache["hf"], dlogits, g, "out.W", "out.b")
        dh = dlogits @ p["out.W"].T
        dh, g["lnf.g"], g["lnf.b"] = layer_norm_backward(dh, p["lnf.g"], cache["lnf"])
        for l in reversed(range(cfg.n_layers)):
            pre = f"layer{l}."
            c = cache["layers"][l]
            dh = dh + _ff_backward(dh, c, p, g, pre)
            dh = dh + _attention_backward(dh, c, p, g, pre, cfg)
        if cache["drop_in"] is not None:
            dh = dh * cache["drop_in"]
        _affine_grads(cache["x"], dh, g, "in.W", "in.b")
        return {k: g[k].astype(self.dtype) for k in p}

    def predict_proba(self, x: np.ndarray, batch: int = 256) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 2:
            return softmax(self.forward(x)[0].astype(np.float64))
        out = [softmax(self.forward(x[i:i + batch])[0].astype(np.float64))
               for i in range(0, len(x), batch)]
        return np.concatenate(out)


def _ff_backward(dh, c, p, g, pre):
    """Gradient reaching the residual stream through the feed-forward branch."""
    df = dh if c["drop_ff"] is None else dh * c["drop_ff"]
    _affine_grads(c["r"], df, g, pre + "ff.W2", pre + "ff.b2")
    du = (df @ p[pre + "ff.W2"].T) * (c["u"] > 0)
    _affine_grads(c["f_in"], du, g, pre + "ff.W1", pre + "ff.b1")
    dfin = du @ p[pre + "ff.W1"].T
    dx, g[pre + "ln2.g"], g[pre + "ln2.b"] = layer_norm_backward(dfin, p[pre + "ln2.g"], c["ln2"])
    return dx


def _attention_backward(dh, c, p, g, pre, cfg):
    """Gradient reaching the residual stream through the attention branch."""
    b, L, d = dh.shape
    H, dk = cfg.n_heads, d // cfg.n_heads
    dout = dh if c["drop_attn_out"] is None else dh * c["drop_attn_out"]
    _affine_grads(c["ctx"], dout, g, pre + "attn.Wo", pre + "attn.bo")
    dctx = (dout @ p[pre + "attn.Wo"].T).reshape(b, L, H, dk).transpose(0, 2, 1, 3)
    datt_d = dctx @ c["v"].transpose(0, 1, 3, 2)
    dv = c["att_d"].transpose(0, 1, 3, 2) @ dctx
    datt = datt_d if c["drop_att"] is None else datt_d * c["drop_att"]
    att = c["att"]
    dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True)) / np.sqrt(dk)
    dq = dscores @ c["k"]
    dk_ = dscores.transpose(0, 1, 3, 2) @ c["q"]
    merge = lambda t: t.transpose(0, 2, 1, 3).reshape(b, L, d)
    da = 0
    for name, dt in (("q", dq), ("k", dk_), ("v", dv)):
        dt = merge(dt)
        _affine_grads(c["a_in"], dt, g, pre + f"attn.W{name}", pre + f"attn.b{name}")
        da = da + dt @ p[pre + f"attn.W{name}"].T
    dx, g[pre + "ln1.g"], g[pre + "ln1.b"] = layer_norm_backward(da, p[pre + "ln1.g"], c["ln1"])
    return dx


class MLP:
    """Three affine layers with ReLU between them."""

    kind = "mlp"

    def __init__(self, cfg: MLPConfig, rng: Optional[np.random.Generator] = None,
                 dtype=np.float32, params: Optional[Params] = None):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.params = params if params is not None else self.init_params(cfg, rng, self.dtype)

    @staticmethod
    def init_params(cfg: MLPConfig, rng, dtype) -> Params:
        rng = rng if rng is not None else np.random.default_rng(0)
        n = cfg.hidden
        return {"fc1.W": _uniform(rng, cfg.input_dim, (cfg.input_dim, n), dtype), "fc1.b": np.zeros(n, dtype),
                "fc2.W": _uniform(rng, n, (n, n), dtype), "fc2.b": np.zeros(n, dtype),
                "fc3.W": _uniform(rng, n, (n, cfg.n_classes), dtype),
                "fc3.b": np.zeros(cfg.n_classes, dtype)}

    def forward(self, x: np.ndarray, train: bool = False, rng=None):
        p = self.params
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[-1] != self.cfg.input_dim:
            raise ConfigError(f"expected input dim {self.cfg.input_dim}, got {x.shape[-1]}")
        u1 = x @ p["fc1.W"] + p["fc1.b"]
        r1 = np.maximum(u1, 0)
        u2 = r1 @ p["fc2.W"] + p["fc2.b"]
        r2 = np.maximum(u2, 0)
        logits = r2 @ p["fc3.W"] + p["fc3.b"]
        return logits, {"x": x, "u1": u1, "r1": r1, "u2": u2, "r2": r2}

    def backward(self, cache, dlogits: np.ndarray) -> Params:
        p, g = self.params, {}
        dlogits = dlogits.astype(self.dtype)
        _affine_grads(cache["r2"], dlogits, g, "fc3.W", "fc3.b")
        du2 = (dlogits @ p["fc3.W"].T) * (cache["u2"] > 0)
        _affine_grads(cache["r1"], du2, g, "fc2.W", "fc2.b")
        du1 = (du2 @ p["fc2.W"].T) * (cache["u1"] > 0)
        _affine_grads(cache["x"], du1, g, "fc1.W", "fc1.b")
        return {k: g[k].astype(self.dtype) for k in p}

    def predict_proba(self, x: np.ndarray, batch: int = 4096) -> np.ndarray:
        return softmax(self.forward(x)[0].astype(np.float64))


def build_model(kind: str, cfg, rng=None, dtype=np.float32):
    if kind == "transformer":
        return Transformer(cfg, rng, dtype)
    if kind == "mlp":
        return MLP(cfg, rng, dtype)
    raise ConfigError(f"unknown model kind {kind!r}")


def param_group(name: str) -> str:
    """Coarse group used in gradient-check reports."""
    if ".attn." in name or ".ln1." in name:
        return "attention"
    if ".ff." in name or ".ln2." in name:
        return "feedforward"
    if name.startswith("in."):
        return "input"
    if name.startswith(("out.", "lnf.")):
        return "output"
    return name.split(".")[0]
