# morphable/pca.py
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from exceptions import KTooLarge

from .displacement import build_displacements
from .interfaces import PcaModel, TrainingSet

logger = logging.getLogger(__name__)


def max_pca_components(ts: TrainingSet) -> int:
    return min(3 * ts.m, ts.n - 1)


def learn_pca(ts: TrainingSet, k: Optional[int] = None) -> PcaModel:
    """
    PCA 基线：位移矩阵 V 的 SVD

    Args:
        ts: 训练集
        k: 分量数，None 表示 min(3m, N-1) 的全谱

    Returns:
        PcaModel，eigenvalues = 奇异值² / (N-1)，total_variance 为全谱之和
    """
    k_max = max_pca_components(ts)
    if k is None:
        k = k_max
    if k < 1 or k > k_max:
        raise KTooLarge(f"PCA k must be in [1, {k_max}] for N={ts.n}, m={ts.m}; got {k}")

    mean, V = build_displacements(ts)
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    eig = (s * s) / (ts.n - 1)
    logger.debug("pca: k=%d of %d, explained %.6f", k, k_max, eig[:k].sum() / max(eig.sum(), 1e-300))
    return PcaModel(
        mean=mean,
        basis=U[:, :k],
        eigenvalues=eig[:k],
        total_variance=float(eig.sum()),
    )
