import sys
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到 sys.path
project_root = Path(__file__).resolve().parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from morphable import learn_slc  # noqa: E402
from synth import make_dataset  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    """5 个训练身份 × 3 个表情，12×12 网格，2 个留出身份"""
    return make_dataset(n_identities=5, n_expressions=3, resolution=(12, 12), seed=0, n_test_identities=2)


@pytest.fixture(scope="session")
def small_model(small_dataset):
    return learn_slc(small_dataset.train, k=8, lambda1=0.1, lambda2=0.1, iters=30, seed=0)
