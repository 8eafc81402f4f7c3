"""Binary checkpoint format.

Layout (little-endian)::

    8 bytes   magic  b"HRMOD1\\0\\0"
    u16       format version
    u32       length of the config text block
    ...       config text, UTF-8 ``key=value`` lines sorted by key
    ...       float32 weight arrays in parameter declaration order
    u32       CRC-32 of every preceding byte
"""

from __future__ import annotations

import dataclasses
import math
import os
import struct
import zlib
from pathlib import Path
from typing import Any

import numpy as np

from hr_sentinel.estimator.network import EstimatorConfig, EstimatorModel

MODEL_MAGIC = b"HRMOD1\0\0"
MODEL_VERSION = 1
_PREFIX = struct.Struct("<8sHI")
_CRC = struct.Struct("<I")
_META_PREFIX = "meta."


class CheckpointError(ValueError):
    pass


def _encode(value: Any) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_to_text(cfg: EstimatorConfig, metadata: dict[str, Any] | None = None) -> str:
    items = {f.name: _encode(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)}
    for key, value in (metadata or {}).items():
        items[_META_PREFIX + key] = _encode(value)
    return "".join(f"{k}={items[k]}\n" for k in sorted(items))


def _decode(field_type: Any, raw: str) -> Any:
    t = str(field_type)
    if t.startswith("tuple"):
        return tuple(int(x) for x in raw.split(",") if x)
    if t == "int":
        return int(raw)
    if t == "float":
        return float(raw)
    return raw


def config_from_text(text: str) -> tuple[EstimatorConfig, dict[str, Any]]:
    fields = {f.name: f.type for f in dataclasses.fields(EstimatorConfig)}
    kwargs: dict[str, Any] = {}
    metadata: dict[str, Any] = {}
    for line in text.splitlines():
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise CheckpointError(f"malformed config line {line!r}")
        if key.startswith(_META_PREFIX):
            name = key[len(_META_PREFIX) :]
            metadata[name] = int(raw) if name == "epochs_run" else float(raw) if _is_float(raw) else raw
        elif key in fields:
            kwargs[key] = _decode(fields[key], raw)
        else:
            raise CheckpointError(f"unknown config key {key!r}")
    missing = set(fields) - set(kwargs)
    if missing:
        raise CheckpointError(f"config block lacks {sorted(missing)}")
    try:
        return EstimatorConfig(**kwargs), metadata
    except ValueError as exc:
        raise CheckpointError(f"invalid config in checkpoint: {exc}") from None


def _is_float(raw: str) -> bool:
    try:
        float(raw)
    except ValueError:
        return False
    return True


def model_to_bytes(model: EstimatorModel) -> bytes:
    text = config_to_text(model.config, model.metadata).encode("utf-8")
    parts = [_PREFIX.pack(MODEL_MAGIC, MODEL_VERSION, len(text)), text]
    for arr in model.params.values():
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def model_from_bytes(raw: bytes, source: str = "<bytes>") -> EstimatorModel:
    if len(raw) < _PREFIX.size + _CRC.size:
        raise CheckpointError(f"{source}: file too short to be a checkpoint")
    magic, version, text_len = _PREFIX.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise CheckpointError(f"{source}: bad magic {magic!r}, not a model checkpoint")
    if version != MODEL_VERSION:
        raise CheckpointError(f"{source}: unsupported checkpoint version {version}")
    body, (crc,) = raw[: -_CRC.size], _CRC.unpack(raw[-_CRC.size :])
    if zlib.crc32(body) != crc:
        raise CheckpointError(f"{source}: checksum mismatch (truncated or corrupt file)")
    start = _PREFIX.size + text_len
    if start > len(body):
        raise CheckpointError(f"{source}: config block overruns file")
    cfg, metadata = config_from_text(body[_PREFIX.size : start].decode("utf-8"))
    shapes = cfg.param_shapes()
    expected = 4 * sum(math.prod(s) for s in shapes.values())
    if len(body) - start != expected:
        raise CheckpointError(
            f"{source}: weight block is {len(body) - start} bytes, config implies {expected}"
        )
    params, offset = {}, start
    for name, shape in shapes.items():
        n = math.prod(shape)
        params[name] = np.frombuffer(body, "<f4", n, offset).astype(np.float32).reshape(shape)
        offset += 4 * n
    try:
        return EstimatorModel(cfg, params, metadata)
    except ValueError as exc:
        raise CheckpointError(f"{source}: {exc}") from None


def save_model(model: EstimatorModel, path: str | os.PathLike) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path: str | os.PathLike) -> EstimatorModel:
    return model_from_bytes(Path(path).read_bytes(), str(path))
