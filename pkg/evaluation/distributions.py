# evaluation/distributions.py
from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from exceptions import EmptyInput


def cumulative_error_distribution(
    errors: Sequence[float],
    bins: Optional[Union[int, Sequence[float]]] = None,
) -> pd.Series:
    """
    经验累积分布：误差 ≤ 阈值的比例

    Args:
        errors: 逐顶点误差 mm
        bins: 阈值列表；整数 n 表示 [0, max] 上 n 个等距阈值；None 等价于 101

    Returns:
        Series，index 为阈值（升序），值单调不减，阈值 ≥ max 时为 1.0
    """
    values = np.sort(np.asarray(errors, dtype=np.float64).reshape(-1))
    if len(values) == 0:
        raise EmptyInput("cumulative error distribution needs at least one error")
    if bins is None or isinstance(bins, (int, np.integer)):
        n_bins = 101 if bins is None else int(bins)
        edges = np.linspace(0.0, float(values[-1]), max(n_bins, 2))
    else:
        edges = np.sort(np.asarray(bins, dtype=np.float64).reshape(-1))
    fraction = np.searchsorted(values, edges, side="right") / len(values)
    return pd.Series(fraction, index=pd.Index(edges, name="error_mm"), name="fraction")
