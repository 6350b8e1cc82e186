# geometry/spatial.py
from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

from exceptions import EmptyInput


def point_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """逐对欧氏距离 ‖a - b‖，沿最后一维"""
    return np.linalg.norm(a - b, axis=-1)


class SpatialIndex:
    """
    精确最近邻索引（cKDTree）

    返回的距离统一用 point_distances 重新计算，排序键为 (距离, 下标)，
    与暴力搜索结果逐位一致。第 k 与第 k+1 个候选距离相近时改用球查询兜底。
    """

    _TIE_RTOL = 1e-9

    def __init__(self, points: np.ndarray):
        points = np.array(points, dtype=np.float64, copy=True).reshape(-1, 3)
        if len(points) == 0:
            raise EmptyInput("cannot index an empty point set")
        points.setflags(write=False)
        self._points = points
        self._tree = cKDTree(points)

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return len(self._points)

    def query(self, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        最近邻

        Returns:
            (distances (q,), indices (q,))
        """
        d, idx = self.query_k(queries, 1)
        return d[:, 0], idx[:, 0]

    def query_k(self, queries: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        k 近邻，每行按 (距离, 下标) 升序

        Args:
            queries: (q, 3)
            k: 近邻数，超过点数时截断

        Returns:
            (distances (q, k), indices (q, k))
        """
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        n = len(self._points)
        k = int(min(max(k, 1), n))
        if len(queries) == 0:
            return np.empty((0, k)), np.empty((0, k), dtype=np.int64)

        if k >= n:
            idx = np.broadcast_to(np.arange(n), (len(queries), n))
            return self._sorted(queries, idx, k)

        _, cand = self._tree.query(queries, k=k + 1)
        cand = np.asarray(cand, dtype=np.int64).reshape(len(queries), k + 1)
        dist, idx = self._sorted(queries, cand, k + 1)

        # 第 k 与第 k+1 个候选几乎并列时，候选集可能不完整
        gap = dist[:, k] - dist[:, k - 1]
        suspect = np.flatnonzero(gap <= self._TIE_RTOL * (1.0 + dist[:, k - 1]))
        for row in suspect:
            radius = dist[row, k - 1] * (1.0 + 1e-7) + 1e-9
            ball = np.asarray(self._tree.query_ball_point(queries[row], radius), dtype=np.int64)
            d_row, i_row = self._sorted(queries[row : row + 1], ball[None, :], k)
            dist[row, :k] = d_row[0]
            idx[row, :k] = i_row[0]
        return dist[:, :k], idx[:, :k]

    def _sorted(self, queries: np.ndarray, cand: np.ndarray, keep: int) -> Tuple[np.ndarray, np.ndarray]:
        d = point_distances(self._points[cand], queries[:, None, :])
        order = np.lexsort((cand, d), axis=-1)[:, :keep]
        return np.take_along_axis(d, order, axis=1), np.take_along_axis(cand, order, axis=1)
