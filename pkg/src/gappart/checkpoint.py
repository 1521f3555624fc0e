"""Binary checkpoint format for :class:`GapModel`.

Layout (all integers little-endian)::

    magic        8 bytes   b"GAPCKPT\\0"
    version      u32
    meta_len     u64       then meta_len bytes of UTF-8 JSON
    n_tensors    u32
    shape table  per tensor: u16 name_len, name, u8 ndim, ndim x u64 dims
    payload      float64 LE values of every tensor, in shape-table order
    digest       32 bytes  SHA-256 of everything above

The metadata carries the model config, feature spec and its digest, the config
fingerprint, and optionally Adam hyperparameters and the step counter. Adam
moment arrays, when present, are extra tensors named ``adam.m/<param>`` and
``adam.v/<param>``.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np

from .features import FeatureSpec
from .io import atomic_write, write_vocab
from .model import GapModel, ModelConfig
from .optim import AdamState

MAGIC = b"GAPCKPT\0"
VERSION = 1
_DIGEST = 32


class CheckpointError(ValueError):
    pass


def _encode(model: GapModel, adam_state: AdamState | None, extra_meta: dict | None) -> bytes:
    tensors = dict(model.params)
    meta = {
        "model": model.config.to_dict(),
        "embedding": model.config.embedding,
        "g_parts": model.g_parts,
        "feature_spec": model.feature_spec.to_dict(),
        "feature_digest": model.feature_spec.digest(),
        "config_fingerprint": model.config.fingerprint(),
        "param_names": list(model.params),
    }
    if adam_state is not None:
        meta["adam"] = {"lr": adam_state.lr, "beta1": adam_state.beta1, "beta2": adam_state.beta2,
                        "eps": adam_state.eps, "t": adam_state.t}
        for k in sorted(adam_state.m):
            tensors[f"adam.m/{k}"] = adam_state.m[k]
            tensors[f"adam.v/{k}"] = adam_state.v[k]
    if extra_meta:
        meta["extra"] = extra_meta
    blob = json.dumps(meta, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(blob)), blob,
             struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        nb = name.encode()
        arr = np.asarray(arr)
        parts.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    for arr in tensors.values():
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def save_checkpoint(model: GapModel, path, adam_state: AdamState | None = None,
                    extra_meta: dict | None = None) -> None:
    """Write atomically. A one-hot vocabulary also goes to ``<path>.vocab``."""
    atomic_write(path, _encode(model, adam_state, extra_meta))
    if model.feature_spec.kind == "onehot":
        write_vocab(model.feature_spec.vocab, vocab_path(path))


def vocab_path(path) -> str:
    return os.fspath(path) + ".vocab"


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path):
    """Return ``(model, adam_state_or_None, meta)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic bytes)")
    if len(data) < len(MAGIC) + 4 + _DIGEST:
        raise CheckpointError(f"{path}: checkpoint is truncated")
    r = _Reader(data[:-_DIGEST])
    r.take(len(MAGIC))
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"{path}: format version {version}, this build reads version {VERSION}")
    (meta_len,) = r.unpack("<Q")
    try:
        meta = json.loads(r.take(meta_len).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: metadata block is unreadable ({exc})") from exc
    (count,) = r.unpack("<I")
    table = []
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}Q") if ndim else ()
        table.append((name, tuple(int(s) for s in shape)))
    tensors = {}
    for name, shape in table:
        size = int(np.prod(shape)) if shape else 1
        tensors[name] = np.frombuffer(r.take(8 * size), dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(r.data):
        raise CheckpointError(f"{path}: {len(r.data) - r.pos} unexpected trailing bytes")
    if hashlib.sha256(data[:-_DIGEST]).digest() != data[-_DIGEST:]:
        raise CheckpointError(f"{path}: checksum mismatch, file is corrupted or truncated")

    config = ModelConfig.from_dict(meta["model"])
    spec = FeatureSpec.from_dict(meta["feature_spec"])
    if spec.digest() != meta.get("feature_digest"):
        raise CheckpointError(f"{path}: feature spec digest mismatch")
    params = {k: tensors[k] for k in meta["param_names"]}
    model = GapModel(config, spec, params)
    expected = GapModel.create(config, spec, seed=0).shape_table()
    if model.shape_table() != expected:
        diff = sorted(set(expected.items()) ^ set(model.shape_table().items()))
        raise CheckpointError(f"{path}: shape table does not match the architecture: {diff}")
    adam = None
    if "adam" in meta:
        a = meta["adam"]
        adam = AdamState(lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"], t=a["t"])
        for k in model.params:
            if f"adam.m/{k}" in tensors:
                adam.m[k] = tensors[f"adam.m/{k}"]
                adam.v[k] = tensors[f"adam.v/{k}"]
    return model, adam, meta


def load_checkpoint(path, g_parts: int | None = None) -> GapModel:
    model, _, _ = read_checkpoint(path)
    if g_parts is not None and g_parts != model.g_parts:
        raise CheckpointError(f"checkpoint was trained for g={model.g_parts}, requested g={g_parts}; "
                              "the partition count is fixed by the head")
    return model
