# morphable/slc.py
"""
稀疏局部一致（SLC）形变分量学习

X = Vᵀ (N × 3m)，每列是一个坐标在 N 个训练样本上的位移序列。
求解
    min_{D, C}  (1/3m) [ ‖X - D C‖²_F + λ1 Σ C + λ2 ‖C‖²_F ]
    s.t.        D ≥ 0, C ≥ 0, ‖d_j‖₂ ≤ 1
D (N × k) 为主方向，C (k × 3m) 为展开系数，basis = Cᵀ。
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from exceptions import InvalidHyperparam

from .displacement import build_displacements
from .interfaces import SlcModel, TrainingSet

# 尝试导入 numba 优化函数，如果失败则使用 numpy 向量化版本
try:
    from .numba_accelerator import elastic_net_cd
    USE_NUMBA = True
except ImportError:
    USE_NUMBA = False

logger = logging.getLogger(__name__)

# numba 默认的 workqueue 线程层不允许多个线程同时启动并行内核
_NUMBA_LOCK = threading.Lock()


# ---------------------------
# C 步
# ---------------------------
def _elastic_net_cd_numpy(
    gram: np.ndarray,
    rhs: np.ndarray,
    coef: np.ndarray,
    lambda1: float,
    lambda2: float,
    n_sweeps: int,
    tol: float,
) -> np.ndarray:
    """与 numba 内核相同的坐标顺序，对所有未收敛的列同时更新第 j 个坐标"""
    out = coef.copy()
    k, n_cols = out.shape
    active = np.ones(n_cols, dtype=bool)
    for _ in range(n_sweeps):
        if not active.any():
            break
        max_delta = np.zeros(n_cols)
        for j in range(k):
            denom = gram[j, j] + lambda2
            if denom > 0.0:
                rho = rhs[j] - gram[j] @ out + gram[j, j] * out[j]
                new = np.maximum((rho - 0.5 * lambda1) / denom, 0.0)
            else:
                new = np.zeros(n_cols)
            new = np.where(active, new, out[j])
            max_delta = np.maximum(max_delta, np.abs(new - out[j]))
            out[j] = new
        active &= max_delta > tol
    return out


def update_coefficients(
    X: np.ndarray,
    D: np.ndarray,
    C: np.ndarray,
    lambda1: float,
    lambda2: float,
    n_sweeps: int = 50,
    tol: float = 1e-10,
    use_numba: Optional[bool] = None,
) -> np.ndarray:
    """
    固定 D 求非负弹性网系数 C（热启动）

    Args:
        X: (N, n_cols) 数据
        D: (N, k) 字典
        C: (k, n_cols) 初值
        use_numba: None 表示可用时使用

    Returns:
        (k, n_cols) 新系数
    """
    gram = np.ascontiguousarray(D.T @ D)
    rhs = np.ascontiguousarray(D.T @ X)
    coef = np.ascontiguousarray(C, dtype=np.float64)
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba and USE_NUMBA:
        with _NUMBA_LOCK:
            return elastic_net_cd(gram, rhs, coef, float(lambda1), float(lambda2), int(n_sweeps), float(tol))
    return _elastic_net_cd_numpy(gram, rhs, coef, lambda1, lambda2, n_sweeps, tol)


# ---------------------------
# D 步
# ---------------------------
def project_directions(D: np.ndarray) -> np.ndarray:
    """投影到 {D ≥ 0, ‖d_j‖ ≤ 1}：先截断负值，再把范数 > 1 的列缩回单位球"""
    P = np.maximum(D, 0.0)
    norms = np.linalg.norm(P, axis=0)
    scale = np.where(norms > 1.0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return P * scale


def update_directions(
    X: np.ndarray,
    D: np.ndarray,
    C: np.ndarray,
    n_steps: int = 20,
    tol: float = 1e-12,
) -> np.ndarray:
    """
    固定 C 的投影梯度 + 精确线搜索，目标 ‖X - D C‖² 不增

    步长 1/L，L = 2 λmax(C Cᵀ)；沿 Δ = proj(D - ∇/L) - D 求 [0, 1] 上的最优步长。
    """
    CCt = C @ C.T
    XCt = X @ C.T
    L = 2.0 * float(np.linalg.eigvalsh(CCt)[-1]) if CCt.size else 0.0
    if L <= 0.0:
        return project_directions(D)

    D = project_directions(D)
    for _ in range(n_steps):
        grad = 2.0 * (D @ CCt - XCt)
        delta = project_directions(D - grad / L) - D
        slope = float(np.sum(grad * delta))
        curvature = float(np.sum((delta @ C) ** 2))
        if curvature > 0.0:
            t = min(max(-slope / (2.0 * curvature), 0.0), 1.0)
        else:
            t = 1.0 if slope < 0.0 else 0.0
        if t == 0.0:
            break
        D = D + t * delta
        if t * float(np.abs(delta).max()) <= tol:
            break
    # 线段上的凸组合可能带来 1e-16 级的负值
    return np.maximum(D, 0.0)


# ---------------------------
# 学习器
# ---------------------------
@dataclass
class ObjectiveTerms:
    reconstruction: float
    l1: float
    l2: float
    scale: float

    @property
    def total(self) -> float:
        return self.scale * (self.reconstruction + self.l1 + self.l2)


class SlcLearner:
    """
    交替求解 D / C 的约束弹性网字典学习

    fit 之后 history_ 是每轮一行的 DataFrame：
    round, objective, reconstruction, l1, l2, dead_atoms
    """

    def __init__(
        self,
        k: int = 50,
        lambda1: float = 1.0,
        lambda2: float = 1.0,
        iters: int = 100,
        seed: int = 0,
        rel_tol: float = 1e-6,
        cd_sweeps: int = 50,
        d_steps: int = 20,
        constrained: bool = True,
        use_numba: Optional[bool] = None,
    ):
        if k < 1:
            raise InvalidHyperparam(f"k must be >= 1, got {k}")
        if lambda1 < 0 or lambda2 < 0:
            raise InvalidHyperparam(f"lambda1/lambda2 must be >= 0, got {lambda1}, {lambda2}")
        if iters < 1:
            raise InvalidHyperparam(f"iters must be >= 1, got {iters}")
        if not constrained and (lambda1 != 0 or lambda2 != 0):
            raise InvalidHyperparam("unconstrained check mode requires lambda1 = lambda2 = 0")
        self.k = int(k)
        self.lambda1 = float(lambda1)
        self.lambda2 = float(lambda2)
        self.iters = int(iters)
        self.seed = int(seed)
        self.rel_tol = float(rel_tol)
        self.cd_sweeps = int(cd_sweeps)
        self.d_steps = int(d_steps)
        self.constrained = bool(constrained)
        self.use_numba = use_numba
        self.history_: Optional[pd.DataFrame] = None

    @property
    def hyperparams(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "iters": self.iters,
            "seed": self.seed,
            "constrained": self.constrained,
        }

    def objective_terms(self, X: np.ndarray, D: np.ndarray, C: np.ndarray) -> ObjectiveTerms:
        R = X - D @ C
        return ObjectiveTerms(
            reconstruction=float(np.sum(R * R)),
            l1=self.lambda1 * float(np.sum(np.abs(C))),
            l2=self.lambda2 * float(np.sum(C * C)),
            scale=1.0 / X.shape[1],
        )

    def initial_directions(self, X: np.ndarray) -> np.ndarray:
        """随机取 k 列 |X|，归一化到单位范数（全零列保持为零）"""
        rng = np.random.default_rng(self.seed)
        n_cols = X.shape[1]
        cols = rng.choice(n_cols, size=self.k, replace=self.k > n_cols)
        # 校验模式下保留符号，使 D 保持满秩
        D = np.abs(X[:, cols]) if self.constrained else X[:, cols].copy()
        norms = np.linalg.norm(D, axis=0)
        return D / np.where(norms > 0, norms, 1.0)

    def fit(self, ts: TrainingSet) -> SlcModel:
        mean, V = build_displacements(ts)
        X = np.ascontiguousarray(V.T)
        D, C, history = self.fit_matrix(X)
        self.history_ = history
        return SlcModel.from_factors(
            mean=mean,
            directions=D,
            coefficients=C,
            hyperparams=self.hyperparams,
            objective_trace=history["objective"].tolist(),
        )

    def fit_matrix(self, X: np.ndarray):
        """
        在数据矩阵 X (N × n_cols) 上学习

        Returns:
            (D, C, history)
        """
        X = np.asarray(X, dtype=np.float64)
        D = self.initial_directions(X)
        C = np.zeros((self.k, X.shape[1]))

        rows: List[Dict[str, float]] = []
        prev = None
        for rnd in range(1, self.iters + 1):
            if self.constrained:
                C = update_coefficients(
                    X, D, C, self.lambda1, self.lambda2,
                    n_sweeps=self.cd_sweeps, use_numba=self.use_numba,
                )
                D = update_directions(X, D, C, n_steps=self.d_steps)
                n_dead = self._reseed_dead_atoms(X, D, C)
            else:
                C = np.linalg.lstsq(D, X, rcond=None)[0]
                D = np.linalg.lstsq(C.T, X.T, rcond=None)[0].T
                n_dead = 0

            terms = self.objective_terms(X, D, C)
            obj = terms.total
            rows.append({
                "round": rnd,
                "objective": obj,
                "reconstruction": terms.scale * terms.reconstruction,
                "l1": terms.scale * terms.l1,
                "l2": terms.scale * terms.l2,
                "dead_atoms": n_dead,
            })
            logger.debug("slc round %d: objective %.10g, dead atoms %d", rnd, obj, n_dead)

            if prev is not None and (prev <= 0.0 or (prev - obj) / prev < self.rel_tol):
                break
            if obj == 0.0:
                break
            prev = obj

        dead = int(np.sum(~np.any(D > 0, axis=0))) if self.constrained else 0
        if dead:
            logger.warning("slc: %d of %d atoms are still dead after %d rounds", dead, self.k, len(rows))
        logger.info(
            "slc: k=%d lambda1=%g lambda2=%g, %d rounds, objective %.6g",
            self.k, self.lambda1, self.lambda2, len(rows), rows[-1]["objective"],
        )
        history = pd.DataFrame(rows, columns=["round", "objective", "reconstruction", "l1", "l2", "dead_atoms"])
        return D, C, history

    @staticmethod
    def _reseed_dead_atoms(X: np.ndarray, D: np.ndarray, C: np.ndarray) -> int:
        """
        全零列的原子：先清零对应系数行，再用重建最差样本的 |x| 重新初始化

        系数行为零时改 D 的这一列不改变 D C，目标函数不变。原地修改 D、C。
        """
        dead = np.flatnonzero(~np.any(D > 0, axis=0))
        if len(dead) == 0:
            return 0
        C[dead] = 0.0
        residual = np.linalg.norm(X - D @ C, axis=0)
        order = np.argsort(-residual, kind="stable")
        for rank, j in enumerate(dead):
            worst = order[rank % len(order)]
            col = np.abs(X[:, worst])
            norm = np.linalg.norm(col)
            if norm > 0:
                D[:, j] = col / norm
        return len(dead)


def learn_slc(
    ts: TrainingSet,
    k: int = 50,
    lambda1: float = 1.0,
    lambda2: float = 1.0,
    iters: int = 100,
    seed: int = 0,
    constrained: bool = True,
    **options: Any,
) -> SlcModel:
    """
    学习 SLC 模型

    Args:
        ts: 训练集
        k: 分量数
        lambda1, lambda2: 弹性网权重
        iters: 最多交替轮数
        seed: 初始化随机种子
        constrained: False 时为无约束最小二乘校验模式（仅测试用）
        options: 传给 SlcLearner（rel_tol, cd_sweeps, d_steps, use_numba）

    Returns:
        SlcModel
    """
    learner = SlcLearner(
        k=k, lambda1=lambda1, lambda2=lambda2, iters=iters, seed=seed,
        constrained=constrained, **options,
    )
    return learner.fit(ts)


def sparsity(model: SlcModel) -> float:
    """basis 中恰为 0 的元素比例"""
    if model.basis.size == 0:
        return 1.0
    return float(np.mean(model.basis == 0.0))
