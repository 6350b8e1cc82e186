# mesh_io/model_container.py
"""
SlcModel 二进制容器

布局（小端）：
    magic  4 bytes  b"SLC1"
    m      uint64
    k      uint64
    n      uint64
    mean        3m    float64
    basis       3m×k  float64（行优先）
    directions  n×k   float64（行优先）
    weights     k     float64

另写 <file>.json 保存训练超参和目标函数轨迹，不参与二进制校验。
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from exceptions import BadMagic, DimensionMismatch, MeshIoError, ModelFormatError
from morphable.interfaces import SlcModel

from .atomic import atomic_write
from .interfaces import PathLike

MAGIC = b"SLC1"
_HEADER = struct.Struct("<4sQQQ")
_F8 = np.dtype("<f8")


def metadata_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def encode_model(model: SlcModel) -> bytes:
    header = _HEADER.pack(MAGIC, model.m, model.k, model.n_train)
    parts = [model.mean, model.basis, model.directions, model.weights]
    return header + b"".join(np.ascontiguousarray(p, dtype=_F8).tobytes() for p in parts)


def decode_model(raw: bytes) -> SlcModel:
    if len(raw) < 4:
        raise DimensionMismatch(f"model container truncated: {len(raw)} bytes")
    if raw[:4] != MAGIC:
        raise BadMagic(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < _HEADER.size:
        raise DimensionMismatch(f"model header truncated: {len(raw)} bytes")

    _, m, k, n = _HEADER.unpack_from(raw, 0)
    counts = [3 * m, 3 * m * k, n * k, k]
    expected = _HEADER.size + _F8.itemsize * sum(counts)
    if len(raw) != expected:
        raise DimensionMismatch(
            f"declared m={m}, k={k}, n={n} needs {expected} bytes, file has {len(raw)}"
        )

    arrays = []
    offset = _HEADER.size
    for count in counts:
        arrays.append(np.frombuffer(raw, dtype=_F8, count=count, offset=offset).astype(np.float64))
        offset += count * _F8.itemsize
    mean, basis, directions, weights = arrays

    if np.isnan(weights).any() or (weights < 0).any():
        raise ModelFormatError("weights contain NaN or negative entries")
    return SlcModel(
        mean=mean,
        basis=basis.reshape(3 * m, k),
        directions=directions.reshape(n, k),
        weights=weights,
    )


def write_model(model: SlcModel, path: PathLike) -> None:
    """写出二进制容器与 JSON 元数据"""
    path = Path(path)
    with atomic_write(path, "wb") as f:
        f.write(encode_model(model))
    meta = {
        "m": model.m,
        "k": model.k,
        "n_train": model.n_train,
        "hyperparams": model.hyperparams,
        "objective_trace": model.objective_trace,
    }
    with atomic_write(metadata_path(path), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def read_model(path: PathLike) -> SlcModel:
    """读取二进制容器；JSON 元数据存在时恢复超参和目标函数轨迹"""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise MeshIoError(f"cannot read model {path}: {e}") from e
    model = decode_model(raw)

    meta_file = metadata_path(path)
    if not meta_file.exists():
        return model
    try:
        meta = json.loads(meta_file.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ModelFormatError(f"unreadable model metadata {meta_file}: {e}") from e
    return SlcModel(
        mean=model.mean,
        basis=model.basis,
        directions=model.directions,
        weights=model.weights,
        hyperparams=meta.get("hyperparams", {}),
        objective_trace=meta.get("objective_trace", []),
    )
