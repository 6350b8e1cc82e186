# fitting/deformation.py
from __future__ import annotations

from typing import Optional, Union

import numpy as np

from exceptions import DimensionMismatch, InvalidHyperparam, SingularSystem
from morphable.interfaces import MorphableModel, SlcModel

from .interfaces import Correspondence

WEIGHT_FLOOR = 1e-8


def regularizer(model: MorphableModel, k: Optional[int] = None) -> np.ndarray:
    """
    正则对角线：SLC 为 1 / max(μ, 1e-8)，PCA 为全 1（岭回归）
    """
    k = model.k if k is None else k
    if isinstance(model, SlcModel):
        return 1.0 / np.maximum(model.weights[:k], WEIGHT_FLOOR)
    return np.ones(k)


def solve_coefficients(
    basis: np.ndarray,
    x: np.ndarray,
    lam: float,
    diag: np.ndarray,
) -> np.ndarray:
    """
    α = (CᵀC + λ diag)⁻¹ Cᵀ x

    Args:
        basis: (3m, k) C
        x: (3m,) 或 (3m, q) 右端
        lam: λ ≥ 0
        diag: (k,) 正则对角线

    Returns:
        (k,) 或 (k, q)
    """
    if lam < 0:
        raise InvalidHyperparam(f"lambda must be >= 0, got {lam}")
    k = basis.shape[1]
    if lam == 0 and np.linalg.matrix_rank(basis) < k:
        raise SingularSystem(f"basis has rank < {k} and lambda = 0")
    A = basis.T @ basis + lam * np.diag(diag)
    try:
        return np.linalg.solve(A, basis.T @ x)
    except np.linalg.LinAlgError as e:
        raise SingularSystem(f"deformation system is singular: {e}") from e


def deformation_objective(
    alpha: np.ndarray,
    basis: np.ndarray,
    x: np.ndarray,
    lam: float,
    diag: np.ndarray,
) -> float:
    """‖x - C α‖² + λ Σ diag_j α_j²（闭式解的二次目标）"""
    r = x - basis @ alpha
    return float(r @ r + lam * np.sum(diag * alpha * alpha))


def solve_deformation(
    correspondence: Union[Correspondence, np.ndarray],
    current: np.ndarray,
    model: MorphableModel,
    lam: float = 1.0,
) -> np.ndarray:
    """
    由重索引目标与当前形状求形变系数 α

    X = vec(t̂ᶜ - s)，α = (CᵀC + λ diag(μ⁻¹))⁻¹ Cᵀ X

    Args:
        correspondence: Correspondence 或 (m, 3) 重索引目标
        current: (m, 3) 当前模型 s
        model: SlcModel 或 PcaModel
        lam: λ

    Returns:
        (k,) α
    """
    targets = correspondence.targets if isinstance(correspondence, Correspondence) else correspondence
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
    current = np.asarray(current, dtype=np.float64).reshape(-1, 3)
    if targets.shape != current.shape or targets.size != model.basis.shape[0]:
        raise DimensionMismatch(
            f"targets {targets.shape} / current {current.shape} do not match model with m={model.m}"
        )
    x = (targets - current).reshape(-1)
    return solve_coefficients(model.basis, x, lam, regularizer(model))
