# mesh_io/ply.py
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from exceptions import MeshIndexError, MeshIoError, ParseError, UnsupportedFormat

from .atomic import atomic_write
from .interfaces import IMeshFormat, Mesh

_PLY_TYPES: Dict[str, str] = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_FACE_LIST_NAMES = ("vertex_indices", "vertex_index")


@dataclass
class _Property:
    name: str
    dtype: str                      # 标量类型，或 list 的元素类型
    count_dtype: Optional[str] = None  # 非 None 表示 list 属性

    @property
    def is_list(self) -> bool:
        return self.count_dtype is not None


@dataclass
class _Element:
    name: str
    count: int
    properties: List[_Property] = field(default_factory=list)


class PlyFormat(IMeshFormat):
    """
    PLY：支持 ascii 与 binary_little_endian

    只读取 vertex 的 x/y/z 和 face 的顶点索引列表，其它属性与元素跳过。
    write(..., binary=True) 写出二进制小端格式，默认 ascii。
    """

    @property
    def name(self) -> str:
        return "ply"

    @property
    def suffixes(self) -> Tuple[str, ...]:
        return (".ply",)

    def read(self, path: Path) -> Mesh:
        try:
            raw = Path(path).read_bytes()
        except OSError as e:
            raise MeshIoError(f"cannot read {path}: {e}") from e
        return parse_ply(raw)

    def write(self, mesh: Mesh, path: Path, **options: Any) -> None:
        binary = bool(options.get("binary", False))
        faces = mesh.faces if mesh.faces is not None else np.empty((0, 3), np.int64)
        header = [
            "ply",
            f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
            f"element vertex {mesh.n_vertices}",
            "property double x",
            "property double y",
            "property double z",
        ]
        if mesh.faces is not None:
            header += [f"element face {len(faces)}", "property list uchar int vertex_indices"]
        header.append("end_header")
        head = ("\n".join(header) + "\n").encode("ascii")

        if binary:
            body = mesh.vertices.astype("<f8").tobytes()
            if mesh.faces is not None:
                rec = np.zeros(len(faces), dtype=[("n", "u1"), ("idx", "<i4", (3,))])
                rec["n"] = 3
                rec["idx"] = faces
                body += rec.tobytes()
        else:
            lines = [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices.tolist()]
            lines += [f"3 {a} {b} {c}" for a, b, c in faces.tolist()]
            body = ("\n".join(lines) + ("\n" if lines else "")).encode("ascii")

        with atomic_write(path, "wb") as f:
            f.write(head + body)


# ---------------------------
# 解析
# ---------------------------
def parse_ply(raw: bytes) -> Mesh:
    fmt, elements, body_offset = _parse_header(raw)
    if fmt == "ascii":
        vertices, faces = _parse_ascii_body(raw, body_offset, elements)
    else:
        vertices, faces = _parse_binary_body(raw, body_offset, elements)

    if not np.all(np.isfinite(vertices)):
        raise ParseError("vertex coordinate is not finite")
    n = len(vertices)
    if faces is not None and faces.size and (faces.min() < 0 or faces.max() >= n):
        raise MeshIndexError(f"face references a missing vertex (mesh has {n} vertices)")
    return Mesh(vertices=vertices, faces=faces)


def _parse_header(raw: bytes) -> Tuple[str, List[_Element], int]:
    if not raw.startswith(b"ply"):
        raise ParseError("missing 'ply' magic", offset=0)

    pos = 0
    fmt: Optional[str] = None
    elements: List[_Element] = []
    while True:
        end = raw.find(b"\n", pos)
        if end < 0:
            raise ParseError("header not terminated by end_header", offset=pos)
        try:
            line = raw[pos:end].decode("ascii").strip()
        except UnicodeDecodeError:
            raise ParseError("header is not ASCII", offset=pos) from None
        line_offset, pos = pos, end + 1
        tokens = line.split()
        if not tokens or tokens[0] in ("ply", "comment", "obj_info"):
            continue
        key = tokens[0]

        if key == "end_header":
            break
        if key == "format":
            if len(tokens) < 2:
                raise ParseError("bad format line", offset=line_offset)
            if tokens[1] not in ("ascii", "binary_little_endian"):
                raise UnsupportedFormat(f"PLY format '{tokens[1]}' is not supported")
            fmt = tokens[1]
        elif key == "element":
            if len(tokens) != 3:
                raise ParseError(f"bad element line {line!r}", offset=line_offset)
            try:
                count = int(tokens[2])
            except ValueError:
                raise ParseError(f"bad element count {tokens[2]!r}", offset=line_offset) from None
            if count < 0:
                raise ParseError("negative element count", offset=line_offset)
            elements.append(_Element(tokens[1], count))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", offset=line_offset)
            elements[-1].properties.append(_parse_property(tokens, line_offset))
        else:
            raise ParseError(f"unknown header keyword {key!r}", offset=line_offset)

    if fmt is None:
        raise ParseError("missing format line", offset=0)
    return fmt, elements, pos


def _parse_property(tokens: List[str], offset: int) -> _Property:
    if len(tokens) == 3 and tokens[1] in _PLY_TYPES:
        return _Property(tokens[2], _PLY_TYPES[tokens[1]])
    if len(tokens) == 5 and tokens[1] == "list" and tokens[2] in _PLY_TYPES and tokens[3] in _PLY_TYPES:
        return _Property(tokens[4], _PLY_TYPES[tokens[3]], count_dtype=_PLY_TYPES[tokens[2]])
    raise ParseError(f"bad property line {' '.join(tokens)!r}", offset=offset)


def _vertex_columns(element: _Element) -> List[int]:
    names = [p.name for p in element.properties]
    try:
        cols = [names.index(axis) for axis in ("x", "y", "z")]
    except ValueError:
        raise ParseError("vertex element lacks x/y/z properties") from None
    if any(element.properties[c].is_list for c in cols):
        raise ParseError("vertex x/y/z must be scalar properties")
    return cols


_INT64 = np.iinfo(np.int64)


def _integral(value: float, what: str, offset: Optional[int] = None) -> int:
    """list 长度或索引可能以浮点类型存储，只接受有限整数值"""
    if isinstance(value, float):
        if not math.isfinite(value) or not value.is_integer():
            raise ParseError(f"{what} {value!r} is not an integer", offset=offset)
    return int(value)


def _list_length(value: float, offset: Optional[int] = None) -> int:
    n = _integral(value, "list length", offset)
    if n < 0:
        raise ParseError("negative list length", offset=offset)
    return n


def _vertex_index(value: float, offset: Optional[int] = None) -> int:
    idx = _integral(value, "face index", offset)
    if not _INT64.min <= idx <= _INT64.max:
        raise MeshIndexError(f"face index {idx} is out of range")
    return idx


def _check_ascii_count(element: _Element, tokens_left: int) -> None:
    # 每个属性至少占一个 token
    if element.count * len(element.properties) > tokens_left:
        raise ParseError(
            f"element '{element.name}' declares {element.count} rows, "
            f"only {tokens_left} tokens remain"
        )


def _check_binary_count(element: _Element, bytes_left: int, pos: int) -> None:
    row = sum(np.dtype(p.count_dtype if p.is_list else p.dtype).itemsize for p in element.properties)
    if element.count * row > bytes_left:
        raise ParseError(
            f"element '{element.name}' declares {element.count} rows, "
            f"only {bytes_left} bytes remain",
            offset=pos,
        )


def _face_property(element: _Element) -> Optional[int]:
    for i, p in enumerate(element.properties):
        if p.is_list and p.name in _FACE_LIST_NAMES:
            return i
    return None


def _fan(polygons: List[List[int]]) -> np.ndarray:
    tris = []
    for poly in polygons:
        if len(poly) < 3:
            raise ParseError("face with fewer than 3 vertices")
        for a in range(1, len(poly) - 1):
            tris.append((poly[0], poly[a], poly[a + 1]))
    return np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def _parse_ascii_body(raw: bytes, offset: int, elements: List[_Element]):
    try:
        tokens = raw[offset:].decode("ascii").split()
    except UnicodeDecodeError as e:
        raise ParseError("ASCII body contains non-ASCII bytes", offset=offset + e.start) from None

    it = iter(tokens)
    consumed = 0

    def take(kind: str) -> float:
        nonlocal consumed
        try:
            tok = next(it)
        except StopIteration:
            raise ParseError(f"unexpected end of data (token {consumed})") from None
        consumed += 1
        try:
            return float(tok) if kind.startswith("f") else int(tok)
        except ValueError:
            raise ParseError(f"bad value {tok!r} (token {consumed})") from None

    vertices = np.empty((0, 3))
    faces: Optional[np.ndarray] = None
    for element in elements:
        if element.name == "vertex":
            cols = _vertex_columns(element)
        if not element.properties or element.count == 0:
            continue
        _check_ascii_count(element, len(tokens) - consumed)

        if element.name == "vertex":
            rows = np.empty((element.count, 3))
            for r in range(element.count):
                values = []
                for p in element.properties:
                    if p.is_list:
                        values.append([take(p.dtype) for _ in range(_list_length(take(p.count_dtype)))])
                    else:
                        values.append(take(p.dtype))
                try:
                    rows[r] = [values[c] for c in cols]
                except OverflowError:
                    raise ParseError(f"vertex {r} coordinate does not fit a double") from None
            vertices = rows
        elif element.name == "face":
            face_col = _face_property(element)
            polygons = []
            for _ in range(element.count):
                row = []
                for p in element.properties:
                    if p.is_list:
                        n = _list_length(take(p.count_dtype))
                        row.append([take(p.dtype) for _ in range(n)])
                    else:
                        row.append(take(p.dtype))
                if face_col is not None:
                    polygons.append([_vertex_index(v) for v in row[face_col]])
            faces = _fan(polygons) if face_col is not None else None
        else:
            for _ in range(element.count):
                for p in element.properties:
                    if p.is_list:
                        for _ in range(_list_length(take(p.count_dtype))):
                            take(p.dtype)
                    else:
                        take(p.dtype)
    return vertices, faces


def _parse_binary_body(raw: bytes, offset: int, elements: List[_Element]):
    vertices = np.empty((0, 3))
    faces: Optional[np.ndarray] = None
    pos = offset

    for element in elements:
        if element.name == "vertex":
            _vertex_columns(element)
        if not element.properties or element.count == 0:
            continue
        _check_binary_count(element, len(raw) - pos, pos)

        if not any(p.is_list for p in element.properties):
            # 全标量元素：结构化 dtype 一次读出
            dtype = np.dtype([(f"p{i}", "<" + p.dtype) for i, p in enumerate(element.properties)])
            need = dtype.itemsize * element.count
            table = np.frombuffer(raw, dtype=dtype, count=element.count, offset=pos)
            pos += need
            if element.name == "vertex":
                cols = _vertex_columns(element)
                vertices = np.column_stack(
                    [table[f"p{c}"].astype(np.float64) for c in cols]
                ).reshape(-1, 3)
            continue

        if element.name == "vertex":
            raise ParseError("list properties on the vertex element are not supported", offset=pos)

        face_col = _face_property(element)
        polygons = []
        for _ in range(element.count):
            row = []
            for p in element.properties:
                if p.is_list:
                    value, pos = _unpack(raw, p.count_dtype, pos)
                    n = _list_length(value, offset=pos)
                    # 先按长度检查剩余字节，再构造 struct 格式串
                    size = n * struct.calcsize("<" + _STRUCT_CODES[p.dtype])
                    if pos + size > len(raw):
                        raise ParseError(f"truncated '{element.name}' element", offset=pos)
                    row.append(list(struct.unpack_from(f"<{n}{_STRUCT_CODES[p.dtype]}", raw, pos)))
                    pos += size
                else:
                    value, pos = _unpack(raw, p.dtype, pos)
                    row.append(value)
            if face_col is not None:
                polygons.append([_vertex_index(v, offset=pos) for v in row[face_col]])
        if element.name == "face" and face_col is not None:
            faces = _fan(polygons)
    return vertices, faces


_STRUCT_CODES = {"i1": "b", "u1": "B", "i2": "h", "u2": "H", "i4": "i", "u4": "I", "f4": "f", "f8": "d"}


def _unpack(raw: bytes, dtype: str, pos: int):
    fmt = "<" + _STRUCT_CODES[dtype]
    size = struct.calcsize(fmt)
    if pos + size > len(raw):
        raise ParseError("unexpected end of binary data", offset=pos)
    return struct.unpack_from(fmt, raw, pos)[0], pos + size
