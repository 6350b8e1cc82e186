# mesh_io/files.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from exceptions import MeshIoError

from .interfaces import Mesh, PathLike
from .landmarks import read_landmarks, sidecar_path, write_landmarks
from .registry import get_format

logger = logging.getLogger(__name__)


def read_mesh(path: PathLike, with_landmarks: bool = True) -> Mesh:
    """
    读取网格；同名 .lmk 侧车文件存在时一并读入 landmarks

    Args:
        path: .obj / .ply 文件
        with_landmarks: 是否读取侧车文件

    Returns:
        Mesh
    """
    path = Path(path)
    fmt = get_format(path)
    mesh = fmt.read(path)
    lmk = sidecar_path(path)
    if with_landmarks and lmk.exists():
        mesh = Mesh(vertices=mesh.vertices, faces=mesh.faces, landmarks=read_landmarks(lmk))
    logger.debug("read %s: %d vertices, %d landmarks", path, mesh.n_vertices, len(mesh.landmarks))
    return mesh


def write_mesh(mesh: Mesh, path: PathLike, **options: Any) -> None:
    """
    写出网格；mesh 带 landmarks 时同时写出 .lmk 侧车文件，
    不带时删除已有的同名侧车文件，保证写后再读得到同一个 Mesh

    Args:
        mesh: 网格
        path: 目标文件，后缀决定格式
        options: 传给具体格式（如 PLY 的 binary=True）
    """
    path = Path(path)
    get_format(path).write(mesh, path, **options)
    lmk = sidecar_path(path)
    if mesh.landmarks:
        write_landmarks(mesh.landmarks, lmk)
    elif lmk.exists():
        try:
            lmk.unlink()
        except OSError as e:
            raise MeshIoError(f"cannot remove stale landmark file {lmk}: {e}") from e
        logger.debug("removed stale landmark file %s", lmk)
