# evaluation/builtins.py
from __future__ import annotations

from typing import Any, Dict, Optional, Sequence

import numpy as np

from exceptions import DimensionMismatch, KTooLarge
from fitting.deformation import regularizer, solve_coefficients
from morphable.interfaces import MorphableModel, PcaModel, SlcModel, TrainingSet

from .interfaces import MetricReport
from .registry import register_metric

# 一次比较的样本数 × 测试形状数 × 顶点数上限，控制内存
_CHUNK_ELEMENTS = 4_000_000


def _check_ks(ks: Sequence[int], k_max: int) -> np.ndarray:
    ks = np.asarray(sorted({int(k) for k in ks}), dtype=np.int64)
    if len(ks) == 0:
        raise ValueError("ks must not be empty")
    if ks[0] < 1 or ks[-1] > k_max:
        raise KTooLarge(f"component counts must be in [1, {k_max}], got {ks.tolist()}")
    return ks


def _check_dims(model: MorphableModel, test: TrainingSet) -> None:
    if test.shapes.shape[1] != model.mean.shape[0]:
        raise DimensionMismatch(
            f"test shapes have {test.shapes.shape[1]} coordinates, model has {model.mean.shape[0]}"
        )


def _model_kind(model: MorphableModel) -> str:
    return "slc" if isinstance(model, SlcModel) else "pca"


def mean_vertex_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    已配准形状间逐顶点欧氏距离的均值

    Args:
        a: (..., 3m)
        b: (..., 3m)，可广播

    Returns:
        (...) mm
    """
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    diff = diff.reshape(*diff.shape[:-1], -1, 3)
    return np.linalg.norm(diff, axis=-1).mean(axis=-1)


# ---------------------------
# compactness
# ---------------------------
def compactness(pca: PcaModel, ks: Optional[Sequence[int]] = None, **metadata: Any) -> MetricReport:
    """
    前 k 个特征值占全部方差的比例

    Args:
        pca: 带全谱 total_variance 的 PCA 模型
        ks: 分量数列表，None 表示 1..pca.k
    """
    ks = _check_ks(range(1, pca.k + 1) if ks is None else ks, pca.k)
    cumulative = np.cumsum(pca.eigenvalues)
    total = pca.total_variance
    values = cumulative[ks - 1] / total if total > 0 else np.ones(len(ks))
    return MetricReport(
        metric="compactness",
        x=ks,
        y=np.clip(values, 0.0, 1.0),
        metadata={"model": "pca", "total_variance": float(total), **metadata},
    )


def components_for_variance(pca: PcaModel, fraction: float) -> int:
    """compactness 首次 ≥ fraction 的最小 k；达不到时返回 pca.k"""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    report = compactness(pca)
    hits = np.flatnonzero(report.y >= fraction - 1e-12)
    return int(report.x[hits[0]]) if len(hits) else pca.k


# ---------------------------
# generalization
# ---------------------------
def reconstruction_errors(model: MorphableModel, test: TrainingSet, k: int, lam: float) -> np.ndarray:
    """
    用前 k 个分量按闭式解重建每个测试形状

    Returns:
        (q,) 每个测试形状的平均逐顶点误差 mm
    """
    _check_dims(model, test)
    basis = model.basis[:, :k]
    X = (test.shapes - model.mean).T
    alpha = solve_coefficients(basis, X, lam, regularizer(model, k))
    recon = model.mean[:, None] + basis @ alpha
    return mean_vertex_distance(recon.T, test.shapes)


def generalization(
    model: MorphableModel,
    test: TrainingSet,
    /,
    ks: Optional[Sequence[int]] = None,
    lam: float = 0.0,
    **metadata: Any,
) -> MetricReport:
    """
    对每个 k 截断基，闭式拟合测试形状，报告平均逐顶点误差

    Args:
        model: PCA 或 SLC 模型
        test: 与训练身份不相交的测试集
        ks: 分量数列表，None 表示 1..model.k
        lam: 正则 λ（PCA 可取 0）
    """
    ks = _check_ks(range(1, model.k + 1) if ks is None else ks, model.k)
    values = [float(reconstruction_errors(model, test, int(k), lam).mean()) for k in ks]
    return MetricReport(
        metric="generalization",
        x=ks,
        y=values,
        metadata={"model": _model_kind(model), "lambda": float(lam), "n_test": test.n, **metadata},
    )


# ---------------------------
# specificity
# ---------------------------
def specificity_samples(
    model: PcaModel,
    test: TrainingSet,
    k: int,
    n_samples: int = 1000,
    seed: int = 0,
) -> np.ndarray:
    """
    随机样本与测试集的最小平均逐顶点距离

    系数 α_j ~ N(0, eigenvalue_j)，样本 = mean + basis α。

    Returns:
        (n_samples,) 每个样本到最近测试形状的距离 mm
    """
    _check_dims(model, test)
    _check_ks([k], model.k)
    rng = np.random.default_rng(seed)
    alpha = rng.standard_normal((n_samples, k)) * np.sqrt(model.eigenvalues[:k])
    samples = model.mean + alpha @ model.basis[:, :k].T

    chunk = max(1, _CHUNK_ELEMENTS // max(1, test.n * test.shapes.shape[1]))
    out = np.empty(n_samples)
    for lo in range(0, n_samples, chunk):
        block = samples[lo : lo + chunk]
        d = mean_vertex_distance(block[:, None, :], test.shapes[None, :, :])
        out[lo : lo + chunk] = d.min(axis=1)
    return out


def specificity(
    model: PcaModel,
    test: TrainingSet,
    k: int,
    n_samples: int = 1000,
    seed: int = 0,
) -> float:
    """随机样本到测试集最小距离的平均值，mm"""
    return float(specificity_samples(model, test, k, n_samples, seed).mean())


# ---------------------------
# 注册
# ---------------------------
@register_metric("compactness")
def _compactness_metric(model: PcaModel, data: Any = None, ks=None, **metadata: Any) -> MetricReport:
    return compactness(model, ks, **metadata)


@register_metric("generalization", default_params={"lam": 0.0})
def _generalization_metric(model: MorphableModel, data: TrainingSet, ks=None, lam: float = 0.0, **metadata: Any) -> MetricReport:
    return generalization(model, data, ks, lam, **metadata)


@register_metric("specificity", default_params={"n_samples": 1000, "seed": 0})
def _specificity_metric(
    model: PcaModel,
    data: TrainingSet,
    ks=None,
    n_samples: int = 1000,
    seed: int = 0,
    **metadata: Any,
) -> MetricReport:
    ks = _check_ks(range(1, model.k + 1) if ks is None else ks, model.k)
    values = [specificity(model, data, int(k), n_samples, seed) for k in ks]
    meta: Dict[str, Any] = {"model": "pca", "n_samples": n_samples, "seed": seed, "n_test": data.n}
    meta.update(metadata)
    return MetricReport(metric="specificity", x=ks, y=values, metadata=meta)
