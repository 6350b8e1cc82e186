# geometry/interfaces.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from mesh_io.interfaces import Mesh


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """
    行向量约定的仿射变换：out = in · P + T

    P: (3, 3) 旋转与缩放
    T: (3,) 平移，单位 mm
    """
    P: np.ndarray = field(default_factory=lambda: np.eye(3))
    T: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        P = np.array(self.P, dtype=np.float64, copy=True).reshape(3, 3)
        T = np.array(self.T, dtype=np.float64, copy=True).reshape(3)
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(T))):
            raise ValueError("transform must be finite")
        P.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "T", T)

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls()

    @classmethod
    def translation(cls, offset) -> "SimilarityTransform":
        return cls(np.eye(3), offset)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.P + self.T

    def apply_mesh(self, mesh: Mesh) -> Mesh:
        return mesh.with_vertices(self.apply(mesh.vertices))

    def then(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """先做 self 再做 other"""
        return SimilarityTransform(self.P @ other.P, self.T @ other.P + other.T)

    def inverse(self) -> "SimilarityTransform":
        Pinv = np.linalg.inv(self.P)
        return SimilarityTransform(Pinv, -self.T @ Pinv)

    def to_dict(self) -> dict:
        return {"P": self.P.tolist(), "T": self.T.tolist()}


@dataclass(frozen=True, eq=False)
class CropResult:
    """
    mesh: 裁剪并去中心后的网格
    kept: 保留顶点在原网格中的索引（升序）
    transform: 原坐标 -> 去中心坐标（纯平移）
    nose_tip: 原网格中的鼻尖顶点索引
    """
    mesh: Mesh
    kept: np.ndarray
    transform: SimilarityTransform
    nose_tip: int


@dataclass(frozen=True, eq=False)
class IcpResult:
    transform: SimilarityTransform
    errors: List[float]
    iterations: int


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    """
    mesh: 对齐到模板坐标系的（裁剪后）目标
    transform: 原始目标坐标 -> 模板坐标系
    kept: 裁剪后保留的原始顶点索引
    icp: 刚性 ICP 的细节
    """
    mesh: Mesh
    transform: SimilarityTransform
    kept: np.ndarray
    icp: Optional[IcpResult] = None
