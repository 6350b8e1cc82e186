# geometry/alignment.py
from __future__ import annotations

import logging
from typing import Union

import numpy as np

from exceptions import DegenerateConfiguration, EmptyInput
from mesh_io.interfaces import Mesh

from .interfaces import IcpResult, SimilarityTransform
from .spatial import SpatialIndex

logger = logging.getLogger(__name__)

PointsLike = Union[Mesh, np.ndarray]


def _as_points(x: PointsLike) -> np.ndarray:
    pts = x.vertices if isinstance(x, Mesh) else np.asarray(x, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyInput("point set is empty")
    return pts


def apply_transform(points: np.ndarray, transform: SimilarityTransform) -> np.ndarray:
    return transform.apply(points)


def estimate_similarity(template: np.ndarray, reindexed_target: np.ndarray) -> SimilarityTransform:
    """
    最小二乘求 P、T，使 reindexed_target · P + T 逼近 template（按下标对应）

    两组点先去质心，P = pinv(t - t̄)(s - s̄)，T = s̄ - t̄ P。

    Args:
        template: (m, 3) 模板 s
        reindexed_target: (m, 3) 重索引目标 t̂ᶜ

    Returns:
        SimilarityTransform（作用于目标点）
    """
    s = np.asarray(template, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(reindexed_target, dtype=np.float64).reshape(-1, 3)
    if s.shape != t.shape:
        raise ValueError(f"point sets differ in size: {s.shape} vs {t.shape}")

    s_bar, t_bar = s.mean(axis=0), t.mean(axis=0)
    tc = t - t_bar
    if np.linalg.matrix_rank(tc) < 3:
        raise DegenerateConfiguration(f"target points are affinely dependent ({len(t)} points)")
    P = np.linalg.pinv(tc) @ (s - s_bar)
    if not np.all(np.isfinite(P)) or abs(np.linalg.det(P)) == 0.0:
        raise DegenerateConfiguration("similarity estimate is singular")
    return SimilarityTransform(P, s_bar - t_bar @ P)


def procrustes(source: np.ndarray, target: np.ndarray) -> SimilarityTransform:
    """
    刚性 Procrustes（Kabsch）：source · P + T 逼近 target，P 为旋转

    互协方差秩 < 2（少于 3 个不共线点）时抛 DegenerateConfiguration。
    """
    a_bar, b_bar = source.mean(axis=0), target.mean(axis=0)
    H = (source - a_bar).T @ (target - b_bar)
    if np.linalg.matrix_rank(H) < 2:
        raise DegenerateConfiguration("rigid alignment needs at least 3 non-collinear correspondences")
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    P = R.T
    return SimilarityTransform(P, b_bar - a_bar @ P)


def icp(
    source: PointsLike,
    target: PointsLike,
    max_iter: int = 50,
    tol: float = 1e-6,
) -> IcpResult:
    """
    点到点刚性 ICP

    每次迭代：当前位置的最近邻配对 -> 由原始 source 到配对点的 Procrustes。
    误差为最近邻距离的均方根，改进量 < tol 或达到 max_iter 时停止。

    Returns:
        IcpResult（errors[i] 为第 i 次配对时的误差）
    """
    src = _as_points(source)
    if len(src) < 3 or np.linalg.matrix_rank(src - src.mean(axis=0)) < 2:
        raise DegenerateConfiguration("rigid alignment needs at least 3 non-collinear points")
    index = SpatialIndex(_as_points(target))

    transform = SimilarityTransform.identity()
    errors = []
    for _ in range(max(int(max_iter), 1)):
        current = transform.apply(src)
        d, idx = index.query(current)
        err = float(np.sqrt(np.mean(d * d)))
        if errors and errors[-1] - err < tol:
            errors.append(err)
            break
        errors.append(err)
        if err == 0.0:
            break
        candidate = procrustes(src, index.points[idx])
        transform = candidate

    logger.debug("icp: %d iterations, rms %.6g -> %.6g mm", len(errors), errors[0], errors[-1])
    return IcpResult(transform=transform, errors=errors, iterations=len(errors))


def rigid_icp(
    source: PointsLike,
    target: PointsLike,
    max_iter: int = 50,
    tol: float = 1e-6,
) -> SimilarityTransform:
    """刚性 ICP，返回把 source 对齐到 target 的变换（缩放固定为 1）"""
    return icp(source, target, max_iter=max_iter, tol=tol).transform
