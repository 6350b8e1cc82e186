# synth/degrade.py
from __future__ import annotations

import numpy as np

from mesh_io.interfaces import Mesh

from .interfaces import DegradedMesh


def degrade(
    mesh: Mesh,
    noise_sigma: float = 0.0,
    keep_fraction: float = 1.0,
    seed: int = 0,
    keep_landmarks: bool = False,
) -> DegradedMesh:
    """
    随机下采样 + 高斯噪声，模拟不同扫描设备

    Args:
        mesh: 原始网格
        noise_sigma: 每个坐标的噪声标准差，mm
        keep_fraction: (0, 1]，保留 round(keep_fraction * n) 个顶点
        seed: 随机种子
        keep_landmarks: 标注顶点强制保留

    Returns:
        DegradedMesh；keep_fraction < 1 时不带面（点云），标注经 provenance 重映射
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")

    rng = np.random.default_rng(seed)
    n = mesh.n_vertices
    n_keep = min(max(int(round(keep_fraction * n)), 1), n)

    if n_keep == n:
        kept = np.arange(n)
    else:
        forced = np.unique(list(mesh.landmarks.values())) if keep_landmarks else np.empty(0, dtype=np.int64)
        forced = forced[: n_keep]
        pool = np.setdiff1d(np.arange(n), forced)
        extra = rng.choice(pool, size=n_keep - len(forced), replace=False)
        kept = np.sort(np.concatenate([forced, extra]).astype(np.int64))

    vertices = mesh.vertices[kept]
    if noise_sigma > 0:
        vertices = vertices + rng.normal(0.0, noise_sigma, size=vertices.shape)

    remap = np.full(n, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    landmarks = {name: int(remap[i]) for name, i in mesh.landmarks.items() if remap[i] >= 0}
    faces = mesh.faces if n_keep == n else None
    return DegradedMesh(mesh=Mesh(vertices=vertices, faces=faces, landmarks=landmarks), provenance=kept)


def upsample(mesh: Mesh) -> Mesh:
    """
    中点细分：每条边插入中点，每个三角形分成 4 个

    原顶点保持原下标，新顶点追加在后；标注不变。
    """
    if mesh.faces is None or len(mesh.faces) == 0:
        raise ValueError("upsample needs a triangulated mesh")
    faces = mesh.faces
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    unique, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)

    n = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[unique[:, 0]] + mesh.vertices[unique[:, 1]])
    f = len(faces)
    m01, m12, m20 = (n + inverse[i * f : (i + 1) * f] for i in range(3))
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate([
        np.stack([a, m01, m20], 1),
        np.stack([m01, b, m12], 1),
        np.stack([m20, m12, c], 1),
        np.stack([m01, m12, m20], 1),
    ])
    return Mesh(
        vertices=np.vstack([mesh.vertices, midpoints]),
        faces=new_faces,
        landmarks=mesh.landmarks,
    )
