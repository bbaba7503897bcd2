"""
Checkpoint container.

Layout (little-endian):
    magic     8 bytes  b"SSREADER"
    version   uint32
    header    uint32 length + UTF-8 JSON {"config", "vocab_hash", "parameters"}
    records   per parameter: uint32 name length, name, uint32 rank,
              rank x uint32 dims, float32 values in row-major order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from scoresheet_reader.errors import IncompatibleCheckpointError
from scoresheet_reader.model.config import ModelConfig
from scoresheet_reader.model.network import ScoresheetModel
from scoresheet_reader.utils import Logger

MAGIC = b"SSREADER"
VERSION = 1


def save_checkpoint(model: ScoresheetModel, path, vocab_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    params = model.parameters()
    header = json.dumps({"config": model.config.to_dict(), "vocab_hash": vocab_hash,
                         "parameters": len(params)}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header)))
        f.write(header)
        for p in params:
            name = p.name.encode("utf-8")
            f.write(struct.pack("<I", len(name)))
            f.write(name)
            f.write(struct.pack(f"<I{p.value.ndim}I", p.value.ndim, *p.value.shape))
            f.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())
    Logger.info(f"Saved checkpoint with {len(params)} parameters to {path}")
    return path


def _read(f, size: int) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise IncompatibleCheckpointError("checkpoint is truncated")
    return data


def read_header(path) -> Dict[str, Any]:
    with open(path, "rb") as f:
        return _read_header(f)


def _read_header(f) -> Dict[str, Any]:
    if _read(f, len(MAGIC)) != MAGIC:
        raise IncompatibleCheckpointError("not a scoresheet reader checkpoint")
    version, header_len = struct.unpack("<II", _read(f, 8))
    if version != VERSION:
        raise IncompatibleCheckpointError(f"unsupported checkpoint version {version}")
    return json.loads(_read(f, header_len).decode("utf-8"))


def load_checkpoint(path, vocab_hash: Optional[str] = None) -> Tuple[ScoresheetModel, Dict[str, Any]]:
    """Rebuild the model stored at *path*; reject it when *vocab_hash* differs from the stored one."""
    path = Path(path)
    with open(path, "rb") as f:
        header = _read_header(f)
        if vocab_hash is not None and header["vocab_hash"] != vocab_hash:
            raise IncompatibleCheckpointError(
                f"checkpoint vocabulary {header['vocab_hash'][:12]} does not match {vocab_hash[:12]}")
        model = ScoresheetModel(ModelConfig.from_dict(header["config"]))
        params = {p.name: p for p in model.parameters()}
        if header["parameters"] != len(params):
            raise IncompatibleCheckpointError(
                f"checkpoint holds {header['parameters']} parameters, model has {len(params)}")
        for _ in range(header["parameters"]):
            (name_len,) = struct.unpack("<I", _read(f, 4))
            name = _read(f, name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", _read(f, 4))
            shape = struct.unpack(f"<{rank}I", _read(f, 4 * rank))
            count = int(np.prod(shape)) if rank else 1
            values = np.frombuffer(_read(f, 4 * count), dtype="<f4").reshape(shape)
            if name not in params or params[name].shape != shape:
                raise IncompatibleCheckpointError(f"unexpected parameter {name} {shape}")
            params[name].assign(values)
    Logger.info(f"Loaded checkpoint {path}")
    return model, header


__all__ = ["load_checkpoint", "read_header", "save_checkpoint"]
