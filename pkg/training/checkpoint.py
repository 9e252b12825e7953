"""Versioned binary checkpoint of named parameter arrays plus the model config.

Layout (little-endian):
    magic "BLVA" | u32 version | u64 header length | UTF-8 JSON header |
    float32 payload | u32 array count

Header: {"config": ModelConfig, "seed": int, "steps": int,
         "tensors": {name: {"dtype": "float32", "shape": [...], "offset": bytes}}}
Offsets are relative to the payload start and ascend in sorted-name order.
"""

import hashlib
import json
import logging
import os
import struct
from typing import Any, Dict, Optional

import numpy as np

from config.app_config import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from config.run_config import ModelConfig
from model.bliva import BlivaModel
from training.errors import (CheckpointFormatError, CheckpointMagicError, CheckpointShapeError,
                             CheckpointVersionError)
from utils.resource_path import ensure_parent_dir

logger = logging.getLogger(__name__)

_PREFIX = struct.Struct("<4sIQ")
_COUNT = struct.Struct("<I")
_DTYPE = "float32"
_ITEMSIZE = 4


def _encode(model: BlivaModel, steps: int) -> bytes:
    names = sorted(model.parameters())
    tensors, offset = {}, 0
    for name in names:
        t = model.parameters()[name]
        tensors[name] = {"dtype": _DTYPE, "shape": list(t.shape), "offset": offset}
        offset += t.data.size * _ITEMSIZE
    header = {"config": model.config.model_dump(), "seed": model.seed, "steps": steps,
              "tensors": tensors}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(model.parameters()[n].data, dtype="<f4").tobytes()
                       for n in names)
    return (_PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes))
            + header_bytes + payload + _COUNT.pack(len(names)))


def save_checkpoint(model: BlivaModel, path: str, steps: int = 0) -> str:
    """
    Write the model to path.

    Args:
        model: model to serialize
        path: output file; its parent directory is created
        steps: optimizer steps of the stage that produced the weights

    Returns:
        Checkpoint id (first 16 hex digits of the file's SHA-256)
    """
    blob = _encode(model, steps)
    with open(ensure_parent_dir(path), "wb") as f:
        f.write(blob)
    checkpoint_id = hashlib.sha256(blob).hexdigest()[:16]
    logger.info("Saved checkpoint %s (%d arrays, id %s)", path, len(model.parameters()),
                checkpoint_id)
    return checkpoint_id


def checkpoint_id(path: str) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()[:16]


def _read_header(f, file_size: int) -> Dict[str, Any]:
    prefix = f.read(_PREFIX.size)
    if len(prefix) < 4 or prefix[:4] != CHECKPOINT_MAGIC:
        raise CheckpointMagicError(f"Bad checkpoint magic {prefix[:4]!r}")
    if len(prefix) != _PREFIX.size:
        raise CheckpointFormatError("Truncated checkpoint prefix")
    _, version, header_len = _PREFIX.unpack(prefix)
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"Checkpoint version {version} not supported "
                                     f"(expected {CHECKPOINT_VERSION})")
    if _PREFIX.size + header_len + _COUNT.size > file_size:
        raise CheckpointFormatError(f"Header length {header_len} exceeds file size {file_size}")
    try:
        header = json.loads(f.read(header_len).decode("utf-8"))
        tensors = header["tensors"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise CheckpointFormatError(f"Malformed checkpoint header: {e}") from e

    payload_size = file_size - _PREFIX.size - header_len - _COUNT.size
    expected = 0
    for name in sorted(tensors):
        entry = tensors[name]
        if entry.get("dtype") != _DTYPE or entry.get("offset") != expected:
            raise CheckpointFormatError(f"Entry {name}: bad dtype or non-contiguous offset")
        expected += int(np.prod(entry["shape"])) * _ITEMSIZE
    if expected != payload_size:
        raise CheckpointFormatError(f"Payload is {payload_size} bytes, header describes {expected}")
    header["_payload_start"] = _PREFIX.size + header_len
    return header


def read_header(path: str) -> Dict[str, Any]:
    """Validated header of a checkpoint file (no payload read)."""
    with open(path, "rb") as f:
        header = _read_header(f, os.path.getsize(path))
    header.pop("_payload_start")
    return header


def load_checkpoint(path: str, config: Optional[ModelConfig] = None,
                    model: Optional[BlivaModel] = None) -> BlivaModel:
    """
    Load a checkpoint.

    The header is fully validated against the target model before any payload
    is read, so a failed load never leaves a model half-written.

    Args:
        path: checkpoint file
        config: build the target model from this config instead of the stored one
        model: load into this existing model instead of building one

    Returns:
        The loaded model

    Raises:
        CheckpointMagicError: Wrong magic bytes
        CheckpointVersionError: Unsupported version
        CheckpointShapeError: Names or shapes differ from the target model
        CheckpointFormatError: Malformed header, payload or trailer
    """
    file_size = os.path.getsize(path)
    with open(path, "rb") as f:
        header = _read_header(f, file_size)
        if model is None:
            stored = ModelConfig.model_validate(header["config"])
            model = BlivaModel(config if config is not None else stored, header.get("seed", 0))

        tensors = header["tensors"]
        params = model.parameters()
        missing = [name for name in params if name not in tensors]
        if missing:
            raise CheckpointShapeError(f"Parameters missing from checkpoint: {missing[:5]}")
        mismatched = [f"{name}: checkpoint shape {tuple(tensors[name]['shape'])} "
                      f"!= model shape {t.shape}"
                      for name, t in params.items() if tuple(tensors[name]["shape"]) != t.shape]
        if mismatched:
            raise CheckpointShapeError(f"{len(mismatched)} parameter shape mismatch(es): "
                                       + "; ".join(mismatched))
        extra = sorted(set(tensors) - set(params))
        if extra:
            raise CheckpointShapeError(f"Checkpoint has parameters the model lacks: {extra[:5]}")

        f.seek(header["_payload_start"])
        payload = f.read(file_size - header["_payload_start"] - _COUNT.size)
        (count,) = _COUNT.unpack(f.read(_COUNT.size))
        if count != len(tensors):
            raise CheckpointFormatError(f"Trailer count {count} != {len(tensors)} arrays")

    for name, t in params.items():
        entry = tensors[name]
        n = int(np.prod(entry["shape"]))
        values = np.frombuffer(payload, dtype="<f4", count=n, offset=entry["offset"])
        t.data = values.reshape(t.shape).astype(t.data.dtype)
        t.grad = None
    logger.info("Loaded checkpoint %s (%d arrays)", path, len(params))
    return model
