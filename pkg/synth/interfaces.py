# synth/interfaces.py
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from mesh_io.interfaces import Mesh
from morphable.interfaces import TrainingSet


@dataclass(frozen=True)
class FaceSpec:
    """
    参数化合成人脸

    身份参数：椭球半径 rx/ry/rz（mm）、鼻子高度与宽度、下颌宽度系数、眼窝深度
    表情参数：张嘴幅度（mm）、微笑、抬眉（mm）
    resolution: (u, v) 网格列数、行数
    """
    rx: float = 50.0
    ry: float = 60.0
    rz: float = 40.0
    nose_amplitude: float = 18.0
    nose_width: float = 0.18
    jaw_width: float = 0.92
    eye_depth: float = 4.0
    mouth_open: float = 0.0
    smile: float = 0.0
    brow_raise: float = 0.0
    resolution: Tuple[int, int] = (32, 32)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "resolution", (int(self.resolution[0]), int(self.resolution[1])))
        values = [v for k, v in asdict(self).items() if k not in ("resolution", "seed")]
        if not all(math.isfinite(float(v)) for v in values):
            raise ValueError("face parameters must be finite")
        if min(self.resolution) < 8:
            raise ValueError(f"resolution must be at least 8x8, got {self.resolution}")
        if self.nose_width <= 0:
            raise ValueError("nose_width must be positive")

    def with_expression(self, mouth_open: float = 0.0, smile: float = 0.0, brow_raise: float = 0.0) -> "FaceSpec":
        params = asdict(self)
        params.update(mouth_open=mouth_open, smile=smile, brow_raise=brow_raise)
        return FaceSpec(**params)

    def neutral(self) -> "FaceSpec":
        return self.with_expression()


@dataclass(frozen=True, eq=False)
class DegradedMesh:
    """
    mesh: 加噪/下采样后的网格
    provenance: (n_keep,) 每个顶点在原网格中的下标
    """
    mesh: Mesh
    provenance: np.ndarray


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    """
    train: 训练身份 × 表情
    test: 留出身份 × 表情（不足 2 个形状时为 None）
    manifest: mesh_id, split, identity, expression, seed
    regions: 区域名 -> (m,) 布尔掩码（mouth / brow）
    specs: mesh_id -> FaceSpec
    """
    train: TrainingSet
    test: Optional[TrainingSet]
    manifest: pd.DataFrame
    regions: Dict[str, np.ndarray] = field(default_factory=dict)
    specs: Dict[str, FaceSpec] = field(default_factory=dict)

    @property
    def expression_mask(self) -> np.ndarray:
        """所有表情区域的并集"""
        masks = list(self.regions.values())
        return np.logical_or.reduce(masks) if masks else np.zeros(self.train.m, dtype=bool)
