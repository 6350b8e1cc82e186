# evaluation/registry.py
from __future__ import annotations

from typing import Any, Callable, Dict, List, Optional

from registry import NamedRegistry

from .interfaces import IMetric, MetricReport


_METRICS: NamedRegistry[IMetric] = NamedRegistry("Metric", "metrics")


class FunctionMetric(IMetric):
    """
    把函数包装成 IMetric，调用时 default_params 被关键字参数覆盖
    """
    def __init__(self, name: str, func: Callable[..., MetricReport], default_params=None):
        self._name = name
        self._func = func
        self._default_params = default_params or {}

    @property
    def name(self) -> str:
        return self._name

    @property
    def default_params(self):
        return self._default_params

    def evaluate(self, model: Any, data: Any, **params: Any) -> MetricReport:
        p = dict(self._default_params)
        p.update(params)
        return self._func(model, data, **p)


def register_metric(
    name: Optional[str] = None,
    default_params: Optional[Dict[str, Any]] = None,
):
    """装饰器：注册函数式 metric"""
    return _METRICS.decorator(lambda n, func: FunctionMetric(n, func, default_params), name)


def add_metric(metric: IMetric):
    """注册类式 metric 实例"""
    _METRICS.add(metric)


def get_metric(name: str) -> IMetric:
    return _METRICS.get(name)


def list_metrics() -> List[IMetric]:
    return _METRICS.list()
