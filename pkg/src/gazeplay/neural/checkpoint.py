"""Checkpoint files: a JSON header followed by 64-bit little-endian parameter blobs."""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .models import MLP, MLPConfig, ModelConfig, Transformer

_MAGIC = b"GZCK"


def save_checkpoint(path, model) -> None:
    names = sorted(model.params)
    header = {"kind": model.kind, "config": model.cfg.to_json(), "dtype": model.dtype.str,
              "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names]}
    head = json.dumps(header, sort_keys=True).encode()
    blobs = b"".join(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes() for n in names)
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<I", len(head)) + head + blobs)
    os.replace(tmp, path)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint")
    (n,) = struct.unpack_from("<I", blob, 4)
    header = json.loads(blob[8:8 + n])
    dtype = np.dtype(header["dtype"])
    offset = 8 + n
    params = {}
    for entry in header["params"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        params[entry["name"]] = arr.reshape(entry["shape"]).astype(dtype)
        offset += 8 * count
    if header["kind"] == "transformer":
        return Transformer(ModelConfig(**header["config"]), dtype=dtype, params=params)
    if header["kind"] == "mlp":
        return MLP(MLPConfig(**header["config"]), dtype=dtype, params=params)
    raise ValueError(f"unknown model kind {header['kind']!r}")
