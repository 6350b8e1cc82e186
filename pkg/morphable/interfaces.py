# morphable/interfaces.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Mapping, Optional, Sequence, TypeAlias, Union

import numpy as np

from exceptions import DimensionMismatch, ModelFormatError, TopologyMismatch

if TYPE_CHECKING:
    from mesh_io.interfaces import Mesh


def _readonly(a: Any, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-D, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


# ---------------------------
# 1) 训练集
# ---------------------------
@dataclass(frozen=True, eq=False)
class TrainingSet:
    """
    已配准网格的训练集

    shapes: (N, 3m) 每行一个 ShapeVector
    faces: 共享拓扑，可为 None
    landmarks: 共享标注（顶点索引）
    names: 每个样本的来源名（文件名或 id）
    """
    shapes: np.ndarray
    faces: Optional[np.ndarray] = None
    landmarks: Mapping[str, int] = field(default_factory=dict)
    names: Sequence[str] = ()

    def __post_init__(self):
        shapes = _readonly(self.shapes, 2, "shapes")
        if shapes.shape[0] < 2:
            raise TopologyMismatch(f"training set needs at least 2 shapes, got {shapes.shape[0]}")
        if shapes.shape[1] == 0 or shapes.shape[1] % 3:
            raise TopologyMismatch(f"shape dimension {shapes.shape[1]} is not a positive multiple of 3")
        names = tuple(str(n) for n in self.names) or tuple(f"shape_{i}" for i in range(shapes.shape[0]))
        if len(names) != shapes.shape[0]:
            raise DimensionMismatch(f"{len(names)} names for {shapes.shape[0]} shapes")
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "landmarks", dict(self.landmarks))
        if self.faces is not None:
            faces = np.array(self.faces, dtype=np.int64, copy=True)
            faces.setflags(write=False)
            object.__setattr__(self, "faces", faces)

    @property
    def n(self) -> int:
        return int(self.shapes.shape[0])

    @property
    def m(self) -> int:
        return int(self.shapes.shape[1] // 3)

    @classmethod
    def from_meshes(cls, meshes: Sequence["Mesh"], names: Optional[Sequence[str]] = None) -> "TrainingSet":
        """
        由已配准网格构造；顶点数或面表不一致时抛 TopologyMismatch 并指明来源

        Args:
            meshes: 网格列表
            names: 与 meshes 对应的来源名
        """
        names = list(names) if names is not None else [f"shape_{i}" for i in range(len(meshes))]
        if len(meshes) < 2:
            raise TopologyMismatch(f"training set needs at least 2 shapes, got {len(meshes)}")
        ref = meshes[0]
        for mesh, name in zip(meshes[1:], names[1:]):
            if mesh.n_vertices != ref.n_vertices:
                raise TopologyMismatch(
                    f"vertex count {mesh.n_vertices} differs from {ref.n_vertices} of '{names[0]}'",
                    source=name,
                )
            same_faces = (mesh.faces is None and ref.faces is None) or (
                mesh.faces is not None and ref.faces is not None and np.array_equal(mesh.faces, ref.faces)
            )
            if not same_faces:
                raise TopologyMismatch(f"face list differs from '{names[0]}'", source=name)
        return cls(
            shapes=np.stack([m.shape_vector() for m in meshes]),
            faces=ref.faces,
            landmarks=ref.landmarks,
            names=names,
        )

    def mesh(self, i: int) -> "Mesh":
        from mesh_io.interfaces import Mesh

        return Mesh(vertices=self.shapes[i].reshape(-1, 3), faces=self.faces, landmarks=self.landmarks)


# ---------------------------
# 2) 模型
# ---------------------------
@dataclass(frozen=True, eq=False)
class SlcModel:
    """
    稀疏局部一致形变模型

    mean: (3m,) 平均形状
    basis: (3m, k) 形变分量（C 的转置）
    directions: (N, k) 主方向 D
    weights: (k,) 每个方向的平均贡献 μ
    hyperparams: 训练参数（lambda1, lambda2, iters, seed, ...）
    objective_trace: 每轮交替后的目标函数值
    """
    mean: np.ndarray
    basis: np.ndarray
    directions: np.ndarray
    weights: np.ndarray
    hyperparams: Dict[str, Any] = field(default_factory=dict)
    objective_trace: List[float] = field(default_factory=list)

    def __post_init__(self):
        mean = _readonly(self.mean, 1, "mean")
        basis = _readonly(self.basis, 2, "basis")
        directions = _readonly(self.directions, 2, "directions")
        weights = _readonly(self.weights, 1, "weights")
        if mean.shape[0] % 3:
            raise DimensionMismatch(f"mean length {mean.shape[0]} is not a multiple of 3")
        if basis.shape[0] != mean.shape[0]:
            raise DimensionMismatch(f"basis has {basis.shape[0]} rows, mean has {mean.shape[0]}")
        k = basis.shape[1]
        if directions.shape[1] != k or weights.shape[0] != k:
            raise DimensionMismatch(
                f"component count mismatch: basis {k}, directions {directions.shape[1]}, weights {weights.shape[0]}"
            )
        if np.isnan(weights).any() or (weights < 0).any():
            raise ModelFormatError("weights must be non-NaN and non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "hyperparams", dict(self.hyperparams))
        object.__setattr__(self, "objective_trace", [float(v) for v in self.objective_trace])

    @classmethod
    def from_factors(
        cls,
        mean: np.ndarray,
        directions: np.ndarray,
        coefficients: np.ndarray,
        hyperparams: Optional[Dict[str, Any]] = None,
        objective_trace: Optional[List[float]] = None,
    ) -> "SlcModel":
        """
        由 D (N×k) 与 C (k×3m) 构造，μ 取 D 每列均值

        D 含负值（非约束校验模式）时 μ 取 |D| 的列均值。
        """
        directions = np.asarray(directions, dtype=np.float64)
        weights = np.abs(directions).mean(axis=0) if (directions < 0).any() else directions.mean(axis=0)
        return cls(
            mean=mean,
            basis=np.asarray(coefficients, dtype=np.float64).T,
            directions=directions,
            weights=weights,
            hyperparams=hyperparams or {},
            objective_trace=objective_trace or [],
        )

    @property
    def k(self) -> int:
        return int(self.basis.shape[1])

    @property
    def m(self) -> int:
        return int(self.mean.shape[0] // 3)

    @property
    def n_train(self) -> int:
        return int(self.directions.shape[0])

    @property
    def lambda1(self) -> Optional[float]:
        return self.hyperparams.get("lambda1")

    @property
    def lambda2(self) -> Optional[float]:
        return self.hyperparams.get("lambda2")


@dataclass(frozen=True, eq=False)
class PcaModel:
    """
    PCA 基线模型

    mean: (3m,)
    basis: (3m, k) 正交列
    eigenvalues: (k,) 非增、非负
    total_variance: 全谱方差和（用于 compactness），默认等于 eigenvalues 之和
    """
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    total_variance: Optional[float] = None

    def __post_init__(self):
        mean = _readonly(self.mean, 1, "mean")
        basis = _readonly(self.basis, 2, "basis")
        eig = _readonly(self.eigenvalues, 1, "eigenvalues")
        if basis.shape[0] != mean.shape[0] or basis.shape[1] != eig.shape[0]:
            raise DimensionMismatch(f"basis {basis.shape} incompatible with mean {mean.shape} / eigenvalues {eig.shape}")
        if (eig < 0).any() or (np.diff(eig) > 0).any():
            raise ValueError("eigenvalues must be non-negative and non-increasing")
        total = float(eig.sum()) if self.total_variance is None else float(self.total_variance)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "eigenvalues", eig)
        object.__setattr__(self, "total_variance", total)

    @property
    def k(self) -> int:
        return int(self.basis.shape[1])

    @property
    def m(self) -> int:
        return int(self.mean.shape[0] // 3)

    def truncate(self, k: int) -> "PcaModel":
        """保留前 k 个分量，total_variance 不变"""
        return PcaModel(self.mean, self.basis[:, :k], self.eigenvalues[:k], self.total_variance)


MorphableModel: TypeAlias = Union[SlcModel, PcaModel]
