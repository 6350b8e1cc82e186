"""
Numba 加速模块

弹性网系数更新（C 步）的逐列坐标下降内核
"""

import numpy as np
from numba import jit, prange


@jit(nopython=True, parallel=True)
def elastic_net_cd(
    gram: np.ndarray,
    rhs: np.ndarray,
    coef: np.ndarray,
    lambda1: float,
    lambda2: float,
    n_sweeps: int,
    tol: float,
) -> np.ndarray:
    """
    非负弹性网的循环坐标下降，各列独立

    每列求解 min_c ‖x - D c‖² + λ1 Σc + λ2 ‖c‖²，c ≥ 0

    Args:
        gram: DᵀD，(k, k)
        rhs: DᵀX，(k, n_cols)
        coef: 热启动系数，(k, n_cols)
        lambda1: ℓ1 权重
        lambda2: ℓ2 权重
        n_sweeps: 每列最多循环次数
        tol: 一次循环内最大改变量 ≤ tol 时该列停止

    Returns:
        更新后的系数，(k, n_cols)
    """
    k, n_cols = coef.shape
    out = coef.copy()

    for i in prange(n_cols):
        for _ in range(n_sweeps):
            max_delta = 0.0
            for j in range(k):
                denom = gram[j, j] + lambda2
                new = 0.0
                if denom > 0.0:
                    rho = rhs[j, i]
                    for l in range(k):
                        if l != j:
                            rho -= gram[j, l] * out[l, i]
                    new = (rho - 0.5 * lambda1) / denom
                    if new < 0.0:
                        new = 0.0
                delta = abs(new - out[j, i])
                if delta > max_delta:
                    max_delta = delta
                out[j, i] = new
            if max_delta <= tol:
                break

    return out
