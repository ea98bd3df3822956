"""Checkpoint format for the translator.

Layout (little-endian): magic "TDG1", u32 version, u32 config length and a
key=value echo of the training configuration (enough to rebuild the
networks), u32 parameter count, then per parameter a length-prefixed name,
u32 rank, u32 dims and the f32 payload.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import DataError
from .training import TranslatorModel, parse_train_config, render_train_config

_MAGIC = b"TDG1"
_VERSION = 1


def save_checkpoint(model: TranslatorModel, path: str | Path) -> None:
    """Atomically write the model's config echo and all named parameters."""
    path = Path(path)
    payload = bytearray()
    payload += _MAGIC
    payload += struct.pack("<I", _VERSION)
    config_blob = render_train_config(model.config).encode("utf-8")
    payload += struct.pack("<I", len(config_blob))
    payload += config_blob
    params = model.named_parameters()
    payload += struct.pack("<I", len(params))
    for name in sorted(params):
        blob = name.encode("utf-8")
        data = params[name].data
        payload += struct.pack("<I", len(blob))
        payload += blob
        payload += struct.pack("<I", data.ndim)
        payload += struct.pack(f"<{data.ndim}I", *data.shape)
        payload += np.ascontiguousarray(data, dtype="<f4").tobytes()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path) -> TranslatorModel:
    """Rebuild the networks from the stored config and load every parameter."""
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise DataError(f"{path}: bad checkpoint magic {raw[:4]!r}")
    try:
        (version,) = struct.unpack_from("<I", raw, 4)
        if version != _VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        (config_len,) = struct.unpack_from("<I", raw, 8)
        offset = 12
        config_text = raw[offset : offset + config_len].decode("utf-8")
        offset += config_len
        config = parse_train_config(config_text)
        model = TranslatorModel(config)
        params = model.named_parameters()
        (count,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        if count != len(params):
            raise DataError(
                f"{path}: checkpoint holds {count} parameters, model expects {len(params)}"
            )
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            shape = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(raw, dtype="<f4", count=size, offset=offset)
            offset += 4 * size
            if name not in params:
                raise DataError(f"{path}: unexpected parameter {name!r}")
            target = params[name]
            if tuple(shape) != target.data.shape:
                raise DataError(
                    f"{path}: parameter {name!r} has shape {shape}, expected {target.data.shape}"
                )
            target.data = data.reshape(shape).astype(np.float32)
        if offset != len(raw):
            raise DataError(f"{path}: trailing bytes in checkpoint")
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        raise DataError(f"{path}: corrupt checkpoint: {exc}") from exc
    return model
