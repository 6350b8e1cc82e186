# mesh_io/atomic.py
from __future__ import annotations

import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterator

from exceptions import MeshIoError


@contextmanager
def atomic_write(path: str | Path, mode: str = "w", encoding: str | None = "utf-8") -> Iterator[IO]:
    """
    先写同目录临时文件，成功后 os.replace 到目标路径

    Args:
        path: 目标文件路径
        mode: 'w' 文本 或 'wb' 二进制
        encoding: 文本模式编码
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    except OSError as e:
        raise MeshIoError(f"cannot create {path}: {e}") from e

    kwargs = {} if "b" in mode else {"encoding": encoding, "newline": "\n"}
    try:
        with os.fdopen(fd, mode, **kwargs) as f:
            yield f
        os.replace(tmp_name, path)
    except OSError as e:
        _discard(tmp_name)
        raise MeshIoError(f"cannot write {path}: {e}") from e
    except BaseException:
        _discard(tmp_name)
        raise


def _discard(tmp_name: str) -> None:
    try:
        os.unlink(tmp_name)
    except FileNotFoundError:
        pass
