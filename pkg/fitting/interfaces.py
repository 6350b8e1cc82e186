# fitting/interfaces.py
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from exceptions import InvalidHyperparam
from geometry.interfaces import SimilarityTransform


# ---------------------------
# 1) 点对点对应
# ---------------------------
@dataclass(frozen=True, eq=False)
class Correspondence:
    """
    模板每个顶点对应的目标点

    targets: (m, 3) 重索引目标 t̂ᶜ
    region_size: (m,) >0 为区域质心（保留点数），0 为最近邻兜底
    fallback_index: (m,) 兜底时的目标点下标，质心时为 -1
    rejected_count: 本次被判为离群而丢弃的目标点数
    tau_global: 全局阈值 τ_g
    tau_local: (m,) 各区域阈值 τ_j，无区域为 NaN
    region_of: (n,) 每个目标点最近的模板顶点（Voronoi 标签）
    kept: (n,) 目标点是否通过阈值
    """
    targets: np.ndarray
    region_size: np.ndarray
    fallback_index: np.ndarray
    rejected_count: int
    tau_global: float = float("nan")
    tau_local: Optional[np.ndarray] = None
    region_of: Optional[np.ndarray] = None
    kept: Optional[np.ndarray] = None

    def __post_init__(self):
        m = len(self.targets)
        if len(self.region_size) != m or len(self.fallback_index) != m:
            raise ValueError("correspondence arrays must cover every template vertex")
        centroid = self.region_size > 0
        if np.any(centroid & (self.fallback_index >= 0)) or np.any(~centroid & (self.fallback_index < 0)):
            raise ValueError("each template vertex needs exactly one assignment")

    @property
    def m(self) -> int:
        return int(len(self.targets))

    @property
    def is_fallback(self) -> np.ndarray:
        return self.region_size == 0

    @property
    def n_centroid(self) -> int:
        return int(np.count_nonzero(self.region_size))


class ICorrespondenceStrategy(ABC):
    """
    对应策略接口
    子类实现 match(template, target)
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """策略名（registry 的 key）"""

    @abstractmethod
    def match(self, template: np.ndarray, target: np.ndarray) -> Correspondence:
        """
        输入:
          template: (m, 3) 当前模型 s
          target:   (n, 3) 目标点 t̂
        输出:
          Correspondence
        """


# ---------------------------
# 2) 拟合参数与结果
# ---------------------------
@dataclass(frozen=True)
class FitParams:
    """
    tau_e: 误差改进阈值 mm
    max_iter: 最大迭代数
    lam: 形变正则 λ
    correspondence: 对应策略名
    keep_best: 误差上升时撤销最后一步，返回上一次迭代的结果
    """
    tau_e: float = 0.01
    max_iter: int = 30
    lam: float = 1.0
    correspondence: str = "mean-point"
    keep_best: bool = True

    def __post_init__(self):
        if self.tau_e < 0:
            raise InvalidHyperparam(f"tau_e must be >= 0, got {self.tau_e}")
        if self.max_iter < 1:
            raise InvalidHyperparam(f"max_iter must be >= 1, got {self.max_iter}")
        if self.lam < 0:
            raise InvalidHyperparam(f"lambda must be >= 0, got {self.lam}")


@dataclass(eq=False)
class FitResult:
    """
    shape: (m, 3) 形变后的模型 s（拟合坐标系）
    alpha: 每次迭代的增量系数
    error_trace: 每次迭代后的平均最近邻误差 mm
    iterations: 迭代数
    converged: 是否因 0 ≤ δ_e ≤ τ_e 停止
    target_transform: 原始目标坐标 -> 拟合坐标系
    initial_error: 迭代前的平均最近邻误差
    stop_reason: converged / max_iter / error_increased
    discarded_error: 被撤销那一步的误差（keep_best 且误差上升时）
    """
    shape: np.ndarray
    alpha: List[np.ndarray]
    error_trace: List[float]
    iterations: int
    converged: bool
    target_transform: SimilarityTransform = field(default_factory=SimilarityTransform.identity)
    initial_error: float = float("nan")
    stop_reason: str = ""
    rejected_trace: List[int] = field(default_factory=list)
    correspondence: Optional[Correspondence] = None
    discarded_error: Optional[float] = None

    @property
    def final_error(self) -> float:
        return float(self.error_trace[-1]) if self.error_trace else float("nan")

    def shape_in_target_frame(self) -> np.ndarray:
        """拟合结果在原始目标坐标系下的顶点"""
        return self.target_transform.inverse().apply(self.shape)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "initial_error": self.initial_error,
            "final_error": self.final_error,
            "error_trace": [float(e) for e in self.error_trace],
            "rejected_trace": [int(r) for r in self.rejected_trace],
            "alpha": [a.tolist() for a in self.alpha],
            "target_transform": self.target_transform.to_dict(),
            "discarded_error": self.discarded_error,
        }
