# synth/generator.py
"""
椭球帽高度场上的参数化人脸

网格顶点下标 = row * u + col，鼻尖位于 (row, col) = (v // 2, u // 2)，
参数坐标 (p, q) 在该顶点处为 (0, 0)。表情位移只在嘴部/眉部的紧支撑区域内非零。
"""
from __future__ import annotations

from typing import Dict, Tuple

import numpy as np

from mesh_io.interfaces import Mesh

from .interfaces import FaceSpec

MOUTH_CENTER = (0.0, -0.5)
MOUTH_RADII = (0.38, 0.22)
BROW_CENTERS = ((-0.35, 0.5), (0.35, 0.5))
BROW_RADII = (0.25, 0.14)
EYE_CENTERS = ((-0.35, 0.22), (0.35, 0.22))
EYE_WIDTH = 0.12

LANDMARK_PARAMS: Dict[str, Tuple[float, float]] = {
    "nose_tip": (0.0, 0.0),
    "mouth_left": (-0.3, -0.5),
    "mouth_right": (0.3, -0.5),
    "eye_left_outer": (-0.55, 0.22),
    "eye_left_inner": (-0.17, 0.22),
    "eye_right_inner": (0.17, 0.22),
    "eye_right_outer": (0.55, 0.22),
    "chin": (0.0, -0.92),
}


def _half_extent(n: int) -> Tuple[int, int]:
    center = n // 2
    return center, max(center, n - 1 - center)


def grid_coordinates(resolution: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """每个顶点的参数坐标 (p, q)，形状 (m,)"""
    u, v = resolution
    cu, hu = _half_extent(u)
    cv, hv = _half_extent(v)
    rows, cols = np.divmod(np.arange(u * v), u)
    return (cols - cu) / hu, (rows - cv) / hv


def grid_faces(resolution: Tuple[int, int]) -> np.ndarray:
    """每个网格四边形两个三角形，法向朝 +z"""
    u, v = resolution
    r, c = np.meshgrid(np.arange(v - 1), np.arange(u - 1), indexing="ij")
    a = (r * u + c).reshape(-1)
    b, d, e = a + 1, a + u + 1, a + u
    return np.stack([np.stack([a, b, d], 1), np.stack([a, d, e], 1)], 1).reshape(-1, 3)


def grid_vertex(resolution: Tuple[int, int], p: float, q: float) -> int:
    """离参数坐标 (p, q) 最近的网格顶点"""
    u, v = resolution
    cu, hu = _half_extent(u)
    cv, hv = _half_extent(v)
    col = int(np.clip(cu + round(p * hu), 0, u - 1))
    row = int(np.clip(cv + round(q * hv), 0, v - 1))
    return row * u + col


def grid_landmarks(resolution: Tuple[int, int]) -> Dict[str, int]:
    return {name: grid_vertex(resolution, p, q) for name, (p, q) in LANDMARK_PARAMS.items()}


def wendland(r: np.ndarray) -> np.ndarray:
    """紧支撑核 (1-r)^4 (4r+1)，r ≥ 1 时恰为 0"""
    r = np.asarray(r, dtype=np.float64)
    return np.where(r < 1.0, (1.0 - np.minimum(r, 1.0)) ** 4 * (4.0 * r + 1.0), 0.0)


def _elliptic_radius(p, q, center, radii):
    return np.sqrt(((p - center[0]) / radii[0]) ** 2 + ((q - center[1]) / radii[1]) ** 2)


def mouth_weight(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return wendland(_elliptic_radius(p, q, MOUTH_CENTER, MOUTH_RADII))


def brow_weight(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return sum(wendland(_elliptic_radius(p, q, c, BROW_RADII)) for c in BROW_CENTERS)


def region_masks(resolution: Tuple[int, int]) -> Dict[str, np.ndarray]:
    """表情位移可能非零的顶点"""
    p, q = grid_coordinates(resolution)
    return {"mouth": mouth_weight(p, q) > 0, "brow": brow_weight(p, q) > 0}


def identity_surface(spec: FaceSpec) -> np.ndarray:
    """中性表情的顶点，(m, 3)"""
    p, q = grid_coordinates(spec.resolution)
    jaw = np.where(q < 0, 1.0 - (1.0 - spec.jaw_width) * (-q), 1.0)
    x = spec.rx * 0.85 * p * jaw
    y = spec.ry * 0.9 * q
    z = spec.rz * np.sqrt(1.0 - 0.49 * (p * p + q * q))

    w = spec.nose_width
    z = z + spec.nose_amplitude * np.exp(-(p * p) / (w * w) - (q * q) / (1.6 * w) ** 2)
    for cx, cy in EYE_CENTERS:
        z = z - spec.eye_depth * np.exp(-((p - cx) ** 2 + (q - cy) ** 2) / EYE_WIDTH**2)
    return np.column_stack([x, y, z])


def expression_displacement(spec: FaceSpec) -> np.ndarray:
    """表情位移，(m, 3)，嘴部与眉部区域之外恰为 0"""
    p, q = grid_coordinates(spec.resolution)
    phi_m = mouth_weight(p, q)
    phi_b = brow_weight(p, q)

    lower = 0.5 * (1.0 + np.tanh((MOUTH_CENTER[1] - q) / 0.06))
    side = (p - MOUTH_CENTER[0]) / MOUTH_RADII[0]

    dx = spec.smile * 0.5 * side * phi_m
    dy = -spec.mouth_open * lower * phi_m + spec.smile * 0.8 * side * side * phi_m + spec.brow_raise * phi_b
    dz = -0.25 * spec.mouth_open * lower * phi_m + 0.2 * spec.brow_raise * phi_b
    return np.column_stack([dx, dy, dz])


def generate(spec: FaceSpec) -> Mesh:
    """
    生成合成人脸

    相同 resolution 的任意两张脸顶点 j 是同一语义位置；鼻尖是 z 最大的顶点。

    Returns:
        带三角面和 8 个标注的 Mesh
    """
    vertices = identity_surface(spec) + expression_displacement(spec)
    return Mesh(
        vertices=vertices,
        faces=grid_faces(spec.resolution),
        landmarks=grid_landmarks(spec.resolution),
    )
