# mesh_io/interfaces.py
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, TypeAlias, Union

import numpy as np

from exceptions import MeshIndexError

PathLike: TypeAlias = Union[str, Path]


# ---------------------------
# 1) 网格数据模型
# ---------------------------
@dataclass(frozen=True, eq=False)
class Mesh:
    """
    通用几何载体

    vertices: (n, 3) 顶点坐标，单位 mm
    faces: (f, 3) 三角面顶点索引，可为 None（点云）
    landmarks: 标注名 -> 顶点索引

    构造后数组只读；需要修改时用 with_vertices 生成新对象。
    """
    vertices: np.ndarray
    faces: Optional[np.ndarray] = None
    landmarks: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64, copy=True)
        if vertices.size == 0:
            vertices = vertices.reshape(0, 3)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError(f"vertices must have shape (n, 3), got {vertices.shape}")
        if not np.all(np.isfinite(vertices)):
            raise ValueError("vertices must be finite (no NaN / inf).")
        vertices.setflags(write=False)
        n = vertices.shape[0]

        faces = self.faces
        if faces is not None:
            faces = np.array(faces, dtype=np.int64, copy=True)
            if faces.size == 0:
                faces = faces.reshape(0, 3)
            if faces.ndim != 2 or faces.shape[1] != 3:
                raise ValueError(f"faces must have shape (f, 3), got {faces.shape}")
            if faces.size and (faces.min() < 0 or faces.max() >= n):
                raise MeshIndexError(
                    f"face references vertex outside [0, {n}): "
                    f"min={faces.min()}, max={faces.max()}"
                )
            faces.setflags(write=False)

        landmarks: Dict[str, int] = {}
        for name, idx in dict(self.landmarks).items():
            idx = int(idx)
            if idx < 0 or idx >= n:
                raise MeshIndexError(f"landmark '{name}' references vertex {idx}, mesh has {n}")
            landmarks[str(name)] = idx

        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "landmarks", landmarks)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def has_faces(self) -> bool:
        return self.faces is not None and len(self.faces) > 0

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """保持拓扑与标注，只替换顶点坐标"""
        return Mesh(vertices=vertices, faces=self.faces, landmarks=self.landmarks)

    def shape_vector(self) -> np.ndarray:
        """线性化为 3m 向量 [x1, y1, z1, ..., xm, ym, zm]"""
        return self.vertices.reshape(-1).copy()

    def landmark_positions(self) -> Dict[str, np.ndarray]:
        return {name: self.vertices[idx].copy() for name, idx in self.landmarks.items()}

    def equals(self, other: "Mesh", atol: float = 0.0) -> bool:
        if self.vertices.shape != other.vertices.shape:
            return False
        if not np.allclose(self.vertices, other.vertices, rtol=0.0, atol=atol):
            return False
        f1 = self.faces if self.faces is not None else np.empty((0, 3), np.int64)
        f2 = other.faces if other.faces is not None else np.empty((0, 3), np.int64)
        return np.array_equal(f1, f2) and dict(self.landmarks) == dict(other.landmarks)


# ---------------------------
# 2) 文件格式接口（策略）
# ---------------------------
class IMeshFormat(ABC):
    """
    网格文件格式接口
    子类实现 read / write，并声明自己处理的后缀
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """格式名（registry 的 key）"""

    @property
    @abstractmethod
    def suffixes(self) -> Tuple[str, ...]:
        """处理的文件后缀，小写，带点，如 ('.obj',)"""

    @abstractmethod
    def read(self, path: Path) -> Mesh:
        """读取几何（顶点 + 三角面），不处理 landmarks 侧车文件"""

    @abstractmethod
    def write(self, mesh: Mesh, path: Path, **options: Any) -> None:
        """写出几何，不处理 landmarks 侧车文件"""
