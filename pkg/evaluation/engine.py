# evaluation/engine.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Union

from .interfaces import IMetric, MetricLike, MetricList, MetricReport, PerMetricParams
from .registry import get_metric, list_metrics

logger = logging.getLogger(__name__)


class MetricEngine:
    def evaluate_one(
        self,
        model: Any,
        data: Any,
        metric: MetricLike,
        **override_params: Any,
    ) -> MetricReport:
        """
        单模型 + 单 metric 评价
        Args:
            model: PcaModel / SlcModel
            data: 测试集（compactness 可为 None）
            metric: metric 实例或名称，内置：'compactness', 'generalization', 'specificity'
            override_params: 覆盖 metric 默认参数的参数
        Returns:
            MetricReport
        """
        if isinstance(metric, str):
            metric = get_metric(metric)
        report = metric.evaluate(model, data, **override_params)
        logger.debug("%s: %d points", metric.name, len(report.x))
        return report

    def evaluate(
        self,
        model: Any,
        data: Any,
        metrics: MetricList = None,
        per_metric_params: PerMetricParams = None,
        **common_params: Any,
    ) -> Dict[str, MetricReport]:
        """
        单模型 + 多 metric 评价
        Args:
            metrics: metric 列表，None 表示全部已注册 metric
            per_metric_params: 每个 metric 独立覆盖参数
            common_params: 所有 metric 共用的参数（如 ks）
        Returns:
            metric 名 -> MetricReport
        """
        if metrics is None:
            metrics = list_metrics()
        per_metric_params = per_metric_params or {}

        out: Dict[str, MetricReport] = {}
        for metric in metrics:
            if isinstance(metric, str):
                metric = get_metric(metric)
            params = dict(common_params)
            params.update(per_metric_params.get(metric.name, {}))
            out[metric.name] = self.evaluate_one(model, data, metric, **params)
        return out

    @staticmethod
    def write_reports(
        reports: Dict[str, MetricReport],
        out_dir: Union[str, Path],
        suffix: str = "",
    ) -> Dict[str, Path]:
        """每个报告写成 <out_dir>/<name><suffix>.csv"""
        out_dir = Path(out_dir)
        paths = {}
        for name, report in reports.items():
            path = out_dir / f"{name}{suffix}.csv"
            report.to_csv(path)
            paths[name] = path
        return paths
