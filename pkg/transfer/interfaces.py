# transfer/interfaces.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from mesh_io.interfaces import Mesh


@dataclass(frozen=True, eq=False)
class ReindexedModel:
    """
    带模板拓扑与标注的重索引目标 t̂′

    mesh: m 个顶点取自原始目标，面与标注来自模板
    source_indices: (m,) 第 j 个顶点在原始目标中的下标，两两不同
    distances: (m,) 拟合顶点 j 到所选目标顶点的距离
    """
    mesh: Mesh
    source_indices: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.source_indices, dtype=np.int64)
        if len(src) != self.mesh.n_vertices:
            raise ValueError("source_indices must have one entry per model vertex")
        if len(np.unique(src)) != len(src):
            raise ValueError("source_indices must be pairwise distinct")
        src.setflags(write=False)
        object.__setattr__(self, "source_indices", src)

    @property
    def landmarks(self) -> Dict[str, int]:
        return dict(self.mesh.landmarks)

    @property
    def target_landmarks(self) -> Dict[str, int]:
        """标注名 -> 原始目标顶点下标"""
        return {name: int(self.source_indices[i]) for name, i in self.mesh.landmarks.items()}

    @property
    def total_distance(self) -> float:
        return float(np.sum(self.distances))
