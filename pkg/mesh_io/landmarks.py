# mesh_io/landmarks.py
"""
.lmk 侧车文件：CSV，表头 name,index，UTF-8，LF 换行
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Mapping

import pandas as pd

from exceptions import MeshIoError, ParseError

from .atomic import atomic_write

LANDMARK_SUFFIX = ".lmk"


def sidecar_path(mesh_path: str | Path) -> Path:
    """网格文件对应的 .lmk 路径（同目录同名）"""
    return Path(mesh_path).with_suffix(LANDMARK_SUFFIX)


def read_landmarks(path: str | Path) -> Dict[str, int]:
    path = Path(path)
    if not path.exists():
        raise MeshIoError(f"landmark file not found: {path}")
    try:
        df = pd.read_csv(path, dtype={"name": str}, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(f"malformed landmark file {path}: {e}") from e

    if list(df.columns) != ["name", "index"]:
        raise ParseError(f"landmark file {path} must have header 'name,index', got {list(df.columns)}", line=1)

    out: Dict[str, int] = {}
    for row_no, (name, idx) in enumerate(zip(df["name"], df["index"]), start=2):
        try:
            value = int(idx)
        except (TypeError, ValueError):
            raise ParseError(f"landmark index is not an integer: {idx!r}", line=row_no) from None
        if str(value) != str(idx).strip():
            raise ParseError(f"landmark index is not an integer: {idx!r}", line=row_no)
        out[str(name)] = value
    return out


def write_landmarks(landmarks: Mapping[str, int], path: str | Path) -> None:
    df = pd.DataFrame(
        {"name": list(landmarks.keys()), "index": [int(v) for v in landmarks.values()]}
    )
    with atomic_write(path, "w") as f:
        df.to_csv(f, index=False, lineterminator="\n")
