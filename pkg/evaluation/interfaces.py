# evaluation/interfaces.py
from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, TypeAlias, Union

import numpy as np
import pandas as pd

from mesh_io.atomic import atomic_write


# =========================
# 1) 统一输出结果
# =========================
@dataclass(eq=False)
class MetricReport:
    """
    metric 的统一输出

    metric: 指标名（CSV 中数值列的列名）
    x: 分量数，严格递增
    y: 指标值（compactness 为比例，generalization / specificity 为 mm）
    metadata: 数据集 id、seed、参数等，写成 CSV 开头的 `# key=value` 行
    """
    metric: str
    x: np.ndarray
    y: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int64).reshape(-1)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.x.shape != self.y.shape:
            raise ValueError(f"x and y differ in length: {self.x.shape} vs {self.y.shape}")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("x must be strictly increasing")
        if not np.all(np.isfinite(self.y)):
            raise ValueError(f"{self.metric}: values must be finite")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"k": self.x, self.metric: self.y})

    def to_csv(self, path: Union[str, Path]) -> None:
        """`# key=value` 元数据行（按 key 排序）+ 表头 k,<metric> + %.17g 数值"""
        with atomic_write(path) as f:
            for key in sorted(self.metadata):
                value = self.metadata[key]
                text = value if isinstance(value, str) else json.dumps(value, sort_keys=True)
                f.write(f"# {key}={text}\n")
            self.to_frame().to_csv(f, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "MetricReport":
        metadata: Dict[str, Any] = {}
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                key, _, raw = line[1:].strip().partition("=")
                try:
                    metadata[key] = json.loads(raw)
                except ValueError:
                    metadata[key] = raw
        df = pd.read_csv(path, comment="#", float_precision="round_trip")
        return cls(metric=str(df.columns[1]), x=df["k"].to_numpy(), y=df.iloc[:, 1].to_numpy(), metadata=metadata)

    def value_at(self, k: int) -> float:
        hits = np.flatnonzero(self.x == k)
        if len(hits) == 0:
            raise KeyError(f"{self.metric} has no value at k={k}")
        return float(self.y[hits[0]])


# =========================
# 2) IMetric 抽象接口（非 dataclass）
# =========================
class IMetric(ABC):
    """
    形状模型指标接口（策略）
    子类只需要实现 evaluate
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """指标名（registry 的 key）"""

    @property
    def default_params(self) -> Dict[str, Any]:
        """默认参数（可选）"""
        return {}

    @abstractmethod
    def evaluate(self, model: Any, data: Any, **params: Any) -> MetricReport:
        """
        输入:
          model: PcaModel / SlcModel
          data:  测试集 TrainingSet（compactness 不使用）
        输出:
          MetricReport
        """


# =========================
# 3) Engine 用的类型别名
# =========================
MetricLike: TypeAlias = Union[str, IMetric]
MetricList: TypeAlias = Optional[Sequence[MetricLike]]

PerMetricParams: TypeAlias = Optional[Dict[str, Dict[str, Any]]]
"""
每个 metric 独立覆盖参数:
{
  "generalization": {"lam": 0.0},
  "specificity": {"n_samples": 1000, "seed": 0}
}
"""
