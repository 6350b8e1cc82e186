# morphable/displacement.py
from __future__ import annotations

from typing import Tuple

import numpy as np

from .interfaces import TrainingSet


def build_displacements(ts: TrainingSet) -> Tuple[np.ndarray, np.ndarray]:
    """
    平均形状与位移场

    Returns:
        mean: (3m,) 训练形状的算术平均
        V: (3m, N) 第 i 列为 shape_i - mean
    """
    mean = ts.shapes.mean(axis=0)
    V = (ts.shapes - mean).T
    return mean, np.ascontiguousarray(V)
