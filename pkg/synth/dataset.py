# synth/dataset.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from mesh_io.atomic import atomic_write
from mesh_io.files import write_mesh
from mesh_io.interfaces import Mesh
from morphable.interfaces import TrainingSet

from .generator import generate, region_masks
from .interfaces import FaceSpec, SyntheticDataset

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["mesh_id", "split", "identity", "expression", "seed"]


def _entropy(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def random_identity(seed: int, identity: int, resolution: Tuple[int, int]) -> FaceSpec:
    """由 (seed, identity) 派生的身份参数，中性表情"""
    rng = np.random.default_rng(np.random.SeedSequence([seed, identity]))
    return FaceSpec(
        rx=rng.uniform(46.0, 52.0),
        ry=rng.uniform(56.0, 62.0),
        rz=rng.uniform(37.0, 42.0),
        nose_amplitude=rng.uniform(15.0, 19.0),
        nose_width=rng.uniform(0.15, 0.22),
        jaw_width=rng.uniform(0.85, 0.98),
        eye_depth=rng.uniform(2.0, 6.0),
        resolution=resolution,
        seed=_entropy(seed, identity),
    )


def random_expression(base: FaceSpec, seed: int, identity: int, expression: int) -> FaceSpec:
    """表情 0 为中性，其余由 (seed, identity, expression) 派生"""
    if expression == 0:
        return base.neutral()
    rng = np.random.default_rng(np.random.SeedSequence([seed, identity, expression]))
    return base.with_expression(
        mouth_open=rng.uniform(1.5, 8.0),
        smile=rng.uniform(-2.0, 4.0),
        brow_raise=rng.uniform(0.0, 5.0),
    )


def _split(
    identities: range,
    n_expressions: int,
    split: str,
    seed: int,
    resolution: Tuple[int, int],
) -> Tuple[List[Mesh], List[dict], Dict[str, FaceSpec]]:
    meshes, rows, specs = [], [], {}
    for identity in identities:
        base = random_identity(seed, identity, resolution)
        for expression in range(n_expressions):
            spec = random_expression(base, seed, identity, expression)
            mesh_id = f"id{identity:03d}_ex{expression:02d}"
            meshes.append(generate(spec))
            specs[mesh_id] = spec
            rows.append({
                "mesh_id": mesh_id,
                "split": split,
                "identity": identity,
                "expression": expression,
                "seed": _entropy(seed, identity, expression),
            })
    return meshes, rows, specs


def make_dataset(
    n_identities: int,
    n_expressions: int,
    resolution: Tuple[int, int] = (32, 32),
    seed: int = 0,
    n_test_identities: int = 2,
) -> SyntheticDataset:
    """
    合成训练/测试集，按身份划分

    Args:
        n_identities: 训练身份数
        n_expressions: 每个身份的表情数（含中性表情 0）
        resolution: 网格分辨率
        seed: 随机种子
        n_test_identities: 留出身份数

    Returns:
        SyntheticDataset；训练集 N = n_identities × n_expressions
    """
    if n_identities < 1 or n_expressions < 1 or n_test_identities < 0:
        raise ValueError("n_identities and n_expressions must be >= 1, n_test_identities >= 0")
    resolution = (int(resolution[0]), int(resolution[1]))

    train_meshes, train_rows, specs = _split(range(n_identities), n_expressions, "train", seed, resolution)
    test_ids = range(n_identities, n_identities + n_test_identities)
    test_meshes, test_rows, test_specs = _split(test_ids, n_expressions, "test", seed, resolution)
    specs.update(test_specs)

    train = TrainingSet.from_meshes(train_meshes, names=[r["mesh_id"] for r in train_rows])
    test = None
    if len(test_meshes) >= 2:
        test = TrainingSet.from_meshes(test_meshes, names=[r["mesh_id"] for r in test_rows])

    manifest = pd.DataFrame(train_rows + test_rows, columns=MANIFEST_COLUMNS)
    logger.info(
        "synth: %d train / %d test shapes, resolution %dx%d, seed %d",
        len(train_meshes), len(test_meshes), resolution[0], resolution[1], seed,
    )
    return SyntheticDataset(
        train=train,
        test=test,
        manifest=manifest,
        regions=region_masks(resolution),
        specs=specs,
    )


def export_dataset(ds: SyntheticDataset, out_dir: str | Path) -> Path:
    """
    写出 train/ test/ 下的 OBJ + .lmk，以及 manifest.csv 与 regions.csv

    Returns:
        输出目录
    """
    out_dir = Path(out_dir)
    for split, ts in (("train", ds.train), ("test", ds.test)):
        if ts is None:
            continue
        for i, name in enumerate(ts.names):
            write_mesh(ts.mesh(i), out_dir / split / f"{name}.obj")

    with atomic_write(out_dir / "manifest.csv") as f:
        ds.manifest.to_csv(f, index=False, lineterminator="\n")

    regions = pd.DataFrame({"vertex": np.arange(ds.train.m)})
    for name, mask in ds.regions.items():
        regions[name] = mask.astype(int)
    with atomic_write(out_dir / "regions.csv") as f:
        regions.to_csv(f, index=False, lineterminator="\n")
    return out_dir
