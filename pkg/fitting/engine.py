# fitting/engine.py
from __future__ import annotations

import logging
from dataclasses import replace
from typing import Any, Optional, Union

import numpy as np

from geometry.alignment import estimate_similarity
from geometry.interfaces import SimilarityTransform
from mesh_io.interfaces import Mesh
from morphable.interfaces import MorphableModel

from .deformation import regularizer, solve_coefficients
from .error import per_vertex_error
from .interfaces import FitParams, FitResult, ICorrespondenceStrategy
from .registry import get_correspondence

logger = logging.getLogger(__name__)


class NonRigidFitter:
    """
    非刚性拟合循环

    每次迭代：对应 -> 相似变换把 t̂ᶜ 和 t̂ 一起对齐到 s -> 闭式求 α -> s += Cα
    -> 误差。迭代数未到上限且误差改进 δ_e > τ_e 时继续。
    keep_best 时误差上升的那一步被撤销，shape / 变换 / 轨迹停在上一次迭代。
    """

    def __init__(self, params: Optional[FitParams] = None, **overrides: Any):
        params = params or FitParams()
        if overrides:
            params = replace(params, **overrides)
        self.params = params

    def _strategy(self) -> ICorrespondenceStrategy:
        return get_correspondence(self.params.correspondence)

    def fit(
        self,
        model: MorphableModel,
        target: Union[Mesh, np.ndarray],
        initial_transform: Optional[SimilarityTransform] = None,
    ) -> FitResult:
        """
        Args:
            model: 形变模型（已与目标粗对齐）
            target: 预处理后的目标网格或点集
            initial_transform: 原始目标 -> 当前目标坐标的变换（预处理产生），
                               只用于记录 target_transform

        Returns:
            FitResult
        """
        p = self.params
        strategy = self._strategy()
        t_hat = target.vertices if isinstance(target, Mesh) else np.asarray(target, dtype=np.float64)
        t_hat = t_hat.reshape(-1, 3)

        s = model.mean.reshape(-1, 3).copy()
        basis = model.basis
        diag = regularizer(model)
        cumulative = initial_transform or SimilarityTransform.identity()

        prev_err, _ = per_vertex_error(s, t_hat)
        initial_err = prev_err
        alphas, errors, rejected = [], [], []
        delta = float("inf")
        corr = None
        discarded = None

        while True:
            state = (s, t_hat, cumulative, corr)
            corr = strategy.match(s, t_hat)
            sim = estimate_similarity(s, corr.targets)
            t_c = sim.apply(corr.targets)
            t_hat = sim.apply(t_hat)
            cumulative = cumulative.then(sim)

            alpha = solve_coefficients(basis, (t_c - s).reshape(-1), p.lam, diag)
            s = s + (basis @ alpha).reshape(-1, 3)
            err, _ = per_vertex_error(s, t_hat)
            delta = prev_err - err
            logger.debug(
                "nrf iteration %d: error %.6f mm (delta %.3g), rejected %d",
                len(errors) + 1, err, delta, corr.rejected_count,
            )

            # 第一步总是保留，结果至少带一次迭代
            if delta < 0 and p.keep_best and errors:
                discarded = err
                s, t_hat, cumulative, corr = state
                break

            alphas.append(alpha)
            errors.append(err)
            rejected.append(corr.rejected_count)
            prev_err = err
            if len(errors) >= p.max_iter or delta <= p.tau_e:
                break

        converged = 0.0 <= delta <= p.tau_e
        if delta < 0:
            stop_reason = "error_increased"
            if discarded is not None:
                logger.warning("nrf: error rose to %.6f mm at iteration %d, step discarded", discarded, len(errors) + 1)
            else:
                logger.warning("nrf: error increased at iteration %d (%.6f mm), stopping", len(errors), errors[-1])
        elif converged:
            stop_reason = "converged"
        else:
            stop_reason = "max_iter"

        logger.info(
            "nrf: %d iterations, error %.6f -> %.6f mm, %s",
            len(errors), initial_err, errors[-1], stop_reason,
        )
        return FitResult(
            shape=s,
            alpha=alphas,
            error_trace=errors,
            iterations=len(errors),
            converged=converged,
            target_transform=cumulative,
            initial_error=initial_err,
            stop_reason=stop_reason,
            rejected_trace=rejected,
            correspondence=corr,
            discarded_error=discarded,
        )


def nrf(
    template_model: MorphableModel,
    target: Union[Mesh, np.ndarray],
    params: Optional[FitParams] = None,
    initial_transform: Optional[SimilarityTransform] = None,
    **overrides: Any,
) -> FitResult:
    """
    非刚性拟合（tau_e / max_iter / lam / correspondence 可直接以关键字覆盖）
    """
    return NonRigidFitter(params, **overrides).fit(template_model, target, initial_transform)
