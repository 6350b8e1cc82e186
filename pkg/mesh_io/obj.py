# mesh_io/obj.py
from __future__ import annotations

import math
from pathlib import Path
from typing import Any, List, Tuple

import numpy as np

from exceptions import MeshIndexError, MeshIoError, ParseError

from .atomic import atomic_write
from .interfaces import IMeshFormat, Mesh


class ObjFormat(IMeshFormat):
    """
    Wavefront OBJ：只保留 v / f 记录

    - vt / vn / o / g / s / usemtl 等记录解析后丢弃
    - f 记录支持 v、v/vt、v//vn、v/vt/vn 写法和负索引
    - 多边形面按扇形三角化：(1,2,3,4) -> (1,2,3), (1,3,4)
    """

    @property
    def name(self) -> str:
        return "obj"

    @property
    def suffixes(self) -> Tuple[str, ...]:
        return (".obj",)

    def read(self, path: Path) -> Mesh:
        try:
            raw = Path(path).read_bytes()
        except OSError as e:
            raise MeshIoError(f"cannot read {path}: {e}") from e
        return parse_obj(raw)

    def write(self, mesh: Mesh, path: Path, **options: Any) -> None:
        lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices.tolist()]
        if mesh.faces is not None:
            lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist())
        with atomic_write(path, "w") as f:
            f.write("\n".join(lines))
            if lines:
                f.write("\n")


def parse_obj(raw: bytes) -> Mesh:
    """从字节解析 OBJ，任何非法输入都以 ParseError / MeshIndexError 结束"""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"OBJ is not valid UTF-8: {e.reason}", offset=e.start) from None

    vertices: List[List[float]] = []
    faces: List[Tuple[int, int, int]] = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        tag = tokens[0]

        if tag == "v":
            if len(tokens) < 4:
                raise ParseError("vertex record needs 3 coordinates", line=lineno)
            try:
                xyz = [float(t) for t in tokens[1:4]]
            except ValueError:
                raise ParseError(f"bad vertex coordinate in {line!r}", line=lineno) from None
            if not all(math.isfinite(c) for c in xyz):
                raise ParseError("vertex coordinate is not finite", line=lineno)
            vertices.append(xyz)

        elif tag == "f":
            if len(tokens) < 4:
                raise ParseError("face record needs at least 3 vertices", line=lineno)
            corners = [_face_index(tok, len(vertices), lineno) for tok in tokens[1:]]
            for a in range(1, len(corners) - 1):
                faces.append((corners[0], corners[a], corners[a + 1]))

    n = len(vertices)
    # 先用 Python 整数检查，超出 int64 的索引不能进 numpy
    if faces and (min(map(min, faces)) < 0 or max(map(max, faces)) >= n):
        raise MeshIndexError(f"face references a missing vertex (mesh has {n} vertices)")
    face_arr = np.asarray(faces, dtype=np.int64).reshape(-1, 3)

    return Mesh(
        vertices=np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        faces=face_arr if faces else None,
    )


def _face_index(token: str, n_seen: int, lineno: int) -> int:
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise ParseError(f"bad face index {token!r}", line=lineno) from None
    if idx > 0:
        return idx - 1
    if idx < 0:
        # 相对索引：-1 表示到目前为止最后一个顶点
        return n_seen + idx
    raise MeshIndexError(f"face index 0 is invalid in OBJ (line {lineno})")
