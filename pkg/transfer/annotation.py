# transfer/annotation.py
from __future__ import annotations

import logging
from typing import Mapping, Optional, Union

import numpy as np
import pandas as pd

from exceptions import NoSharedLandmarks, TargetTooSmall
from geometry.spatial import SpatialIndex
from mesh_io.interfaces import Mesh

from .interfaces import ReindexedModel

logger = logging.getLogger(__name__)

INITIAL_K = 4


def greedy_assignment(fitted: np.ndarray, target: np.ndarray, initial_k: int = INITIAL_K):
    """
    单射贪心配对：按 (距离, 模板下标, 目标下标) 全局升序处理 k 近邻候选，
    两端都未占用时接受；k 从 initial_k 起每轮翻倍，直到全部模板顶点有配对

    Returns:
        (assignment (m,), distances (m,))
    """
    fitted = np.asarray(fitted, dtype=np.float64).reshape(-1, 3)
    target = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    m, n = len(fitted), len(target)
    if n < m:
        raise TargetTooSmall(f"target has {n} vertices, model needs {m}")

    index = SpatialIndex(target)
    assignment = np.full(m, -1, dtype=np.int64)
    distances = np.zeros(m)
    used = np.zeros(n, dtype=bool)

    k = max(int(initial_k), 1)
    rounds = 0
    while True:
        pending = np.flatnonzero(assignment < 0)
        if len(pending) == 0:
            break
        rounds += 1
        kk = min(k, n)
        d, idx = index.query_k(fitted[pending], kk)
        tpl = np.repeat(pending, kk)
        d, idx = d.reshape(-1), idx.reshape(-1)
        order = np.lexsort((idx, tpl, d))
        for c in order:
            j, t = tpl[c], idx[c]
            if assignment[j] < 0 and not used[t]:
                assignment[j] = t
                distances[j] = d[c]
                used[t] = True
        if kk == n:
            break
        k *= 2

    logger.debug("transfer: %d vertices assigned in %d rounds", m, rounds)
    return assignment, distances


def transfer_annotation(
    fitted: np.ndarray,
    target: Mesh,
    template_topology: Optional[np.ndarray],
    template_landmarks: Mapping[str, int],
) -> ReindexedModel:
    """
    把模板拓扑与标注迁移到原始目标

    Args:
        fitted: (m, 3) 拟合后的模型（与 target 同一坐标系）
        target: 原始目标网格
        template_topology: 模板面表
        template_landmarks: 模板标注（顶点下标）

    Returns:
        ReindexedModel
    """
    assignment, distances = greedy_assignment(fitted, target.vertices)
    mesh = Mesh(
        vertices=target.vertices[assignment],
        faces=template_topology,
        landmarks=template_landmarks,
    )
    return ReindexedModel(mesh=mesh, source_indices=assignment, distances=distances)


def _ground_truth_positions(ground_truth: Union[Mesh, Mapping[str, np.ndarray]]) -> dict:
    if isinstance(ground_truth, Mesh):
        return ground_truth.landmark_positions()
    return {name: np.asarray(p, dtype=np.float64).reshape(3) for name, p in ground_truth.items()}


def landmark_error(
    reindexed: ReindexedModel,
    ground_truth: Union[Mesh, Mapping[str, np.ndarray]],
) -> pd.Series:
    """
    迁移后标注与真值标注的欧氏距离

    Args:
        reindexed: 迁移结果
        ground_truth: 带标注的原始目标网格，或 标注名 -> 坐标

    Returns:
        Series，index 为共有标注名（按迁移结果中的顺序），单位 mm
    """
    truth = _ground_truth_positions(ground_truth)
    transferred = reindexed.mesh.landmark_positions()
    shared = [name for name in transferred if name in truth]
    if not shared:
        raise NoSharedLandmarks(
            f"no shared landmarks: transferred {sorted(transferred)}, ground truth {sorted(truth)}"
        )
    errors = [float(np.linalg.norm(transferred[name] - truth[name])) for name in shared]
    return pd.Series(errors, index=pd.Index(shared, name="landmark"), name="error_mm")


def landmark_error_summary(errors: Mapping[str, pd.Series]) -> pd.DataFrame:
    """
    多个目标的逐标注误差汇总

    Args:
        errors: 目标名 -> landmark_error 结果

    Returns:
        DataFrame，index 为标注名加 'overall'，列 mean / std / count
    """
    table = pd.DataFrame(dict(errors)).T
    per_landmark = pd.DataFrame({
        "mean": table.mean(axis=0),
        "std": table.std(axis=0, ddof=0),
        "count": table.count(axis=0),
    })
    values = pd.Series(table.to_numpy(dtype=float).ravel()).dropna()
    overall = pd.DataFrame(
        {"mean": [values.mean()], "std": [values.std(ddof=0)], "count": [values.count()]},
        index=["overall"],
    )
    out = pd.concat([per_landmark, overall])
    out.index.name = "landmark"
    return out
