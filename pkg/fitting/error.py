# fitting/error.py
from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from exceptions import EmptyInput
from geometry.spatial import SpatialIndex


def per_vertex_error(
    fitted: np.ndarray,
    target: np.ndarray,
    index: Optional[SpatialIndex] = None,
) -> Tuple[float, np.ndarray]:
    """
    每个拟合顶点到目标最近邻的距离

    Args:
        fitted: (m, 3)
        target: (n, 3)
        index: 可复用的目标索引

    Returns:
        (平均值, (m,) 逐顶点距离)
    """
    fitted = np.asarray(fitted, dtype=np.float64).reshape(-1, 3)
    if len(fitted) == 0 or np.asarray(target).size == 0:
        raise EmptyInput("per-vertex error needs nonempty point sets")
    if index is None:
        index = SpatialIndex(target)
    d, _ = index.query(fitted)
    return float(d.mean()), d
