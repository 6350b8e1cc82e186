# evaluation/__init__.py
from .interfaces import (
    MetricReport,
    IMetric,
    MetricLike,
    MetricList,
    PerMetricParams,
)
from .registry import (
    register_metric,
    add_metric,
    get_metric,
    list_metrics,
)
from .engine import MetricEngine
from .builtins import (
    compactness,
    components_for_variance,
    generalization,
    reconstruction_errors,
    specificity,
    specificity_samples,
    mean_vertex_distance,
)
from .distributions import cumulative_error_distribution
from .sweep import SweepGrid, SweepRunner, sweep, cell_seed, deformed_vertex_fraction

__all__ = [
    "MetricReport",
    "IMetric",
    "MetricLike",
    "MetricList",
    "PerMetricParams",
    "register_metric",
    "add_metric",
    "get_metric",
    "list_metrics",
    "MetricEngine",
    "compactness",
    "components_for_variance",
    "generalization",
    "reconstruction_errors",
    "specificity",
    "specificity_samples",
    "mean_vertex_distance",
    "cumulative_error_distribution",
    "SweepGrid",
    "SweepRunner",
    "sweep",
    "cell_seed",
    "deformed_vertex_fraction",
]
