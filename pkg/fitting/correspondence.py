# fitting/correspondence.py
from __future__ import annotations

import numpy as np

from exceptions import EmptyInput
from geometry.spatial import SpatialIndex

from .interfaces import Correspondence
from .registry import register_correspondence


def _check(template: np.ndarray, target: np.ndarray):
    template = np.asarray(template, dtype=np.float64).reshape(-1, 3)
    target = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if len(template) == 0 or len(target) == 0:
        raise EmptyInput("correspondence needs nonempty template and target")
    return template, target


@register_correspondence("mean-point")
def correspond(template: np.ndarray, target: np.ndarray) -> Correspondence:
    """
    Voronoi 区域质心对应 + 全局/局部离群剔除

    1. 每个目标点找最近模板顶点，得到区域 R_j
    2. τ_g = 模板 -> 目标最近邻距离的均值 + 标准差
    3. 区域内 τ_j = 到 s_j 距离的均值 + 标准差；距离 ≤ τ_g 且 ≤ τ_j 的点保留，
       有保留点时 s_j 对应它们的质心
    4. 其余模板顶点对应其在全部目标点中的最近邻

    Args:
        template: (m, 3) s
        target: (n, 3) t̂

    Returns:
        Correspondence
    """
    template, target = _check(template, target)
    m, n = len(template), len(target)

    d_region, region_of = SpatialIndex(template).query(target)
    d_global, nn_global = SpatialIndex(target).query(template)
    tau_g = float(d_global.mean() + d_global.std())

    targets = np.empty((m, 3))
    region_size = np.zeros(m, dtype=np.int64)
    tau_local = np.full(m, np.nan)
    kept = np.zeros(n, dtype=bool)

    order = np.argsort(region_of, kind="stable")
    labels, starts = np.unique(region_of[order], return_index=True)
    bounds = np.append(starts, n)
    for j, lo, hi in zip(labels, bounds[:-1], bounds[1:]):
        members = order[lo:hi]
        dists = d_region[members]
        tau_j = float(dists.mean() + dists.std())
        tau_local[j] = tau_j
        keep = (dists <= tau_g) & (dists <= tau_j)
        if keep.any():
            survivors = members[keep]
            kept[survivors] = True
            targets[j] = target[survivors].mean(axis=0)
            region_size[j] = len(survivors)

    fallback = region_size == 0
    targets[fallback] = target[nn_global[fallback]]
    fallback_index = np.where(fallback, nn_global, -1)

    return Correspondence(
        targets=targets,
        region_size=region_size,
        fallback_index=fallback_index,
        rejected_count=int(n - np.count_nonzero(kept)),
        tau_global=tau_g,
        tau_local=tau_local,
        region_of=region_of,
        kept=kept,
    )


@register_correspondence("nearest")
def nearest_correspond(template: np.ndarray, target: np.ndarray) -> Correspondence:
    """每个模板顶点直接对应其最近目标点（无离群剔除）"""
    template, target = _check(template, target)
    _, nn_global = SpatialIndex(target).query(template)
    return Correspondence(
        targets=target[nn_global].copy(),
        region_size=np.zeros(len(template), dtype=np.int64),
        fallback_index=nn_global,
        rejected_count=0,
    )
