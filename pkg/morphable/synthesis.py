# morphable/synthesis.py
from __future__ import annotations

from typing import Mapping

import numpy as np

from exceptions import DimensionMismatch

from .interfaces import MorphableModel


def synthesize(model: MorphableModel, alpha: np.ndarray) -> np.ndarray:
    """s = mean + basis · α"""
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if alpha.shape[0] != model.k:
        raise DimensionMismatch(f"alpha has {alpha.shape[0]} entries, model has k={model.k}")
    return model.mean + model.basis @ alpha


def components_at_vertex(model: MorphableModel, vertex: int, atol: float = 0.0) -> np.ndarray:
    """
    在顶点 vertex 上不为零的分量下标（升序）

    用于控制点式编辑：选中一个顶点，列出能移动它的分量。
    """
    if not 0 <= vertex < model.m:
        raise IndexError(f"vertex {vertex} out of range [0, {model.m})")
    rows = model.basis[3 * vertex : 3 * vertex + 3]
    return np.flatnonzero(np.abs(rows).max(axis=0) > atol)


def deform(model: MorphableModel, shape: np.ndarray, coefficients: Mapping[int, float]) -> np.ndarray:
    """
    把选定分量按权重叠加到任意已配准形状上

    Args:
        shape: (3m,) 或 (m, 3)
        coefficients: 分量下标 -> 权重

    Returns:
        (3m,) 形变后的形状
    """
    s = np.asarray(shape, dtype=np.float64).reshape(-1).copy()
    if s.shape[0] != model.mean.shape[0]:
        raise DimensionMismatch(f"shape has {s.shape[0]} coordinates, model has {model.mean.shape[0]}")
    for j, w in coefficients.items():
        if not 0 <= int(j) < model.k:
            raise IndexError(f"component {j} out of range [0, {model.k})")
        s += float(w) * model.basis[:, int(j)]
    return s
