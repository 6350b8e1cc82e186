# geometry/preprocess.py
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from exceptions import EmptyInput, EmptyResult
from mesh_io.interfaces import Mesh

from .alignment import icp
from .interfaces import AlignmentResult, CropResult, SimilarityTransform
from .spatial import point_distances

logger = logging.getLogger(__name__)

DEFAULT_CROP_RADIUS = 95.0


def nose_tip(points: np.ndarray) -> int:
    """z 最大的顶点；并列时取最小下标"""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise EmptyInput("cannot locate the nose tip of an empty mesh")
    return int(np.argmax(points[:, 2]))


def submesh(mesh: Mesh, kept: np.ndarray) -> Mesh:
    """
    保留指定顶点（升序下标），面与标注按新下标重映射

    引用被删顶点的面丢弃，被删顶点上的标注丢弃。
    """
    kept = np.asarray(kept, dtype=np.int64)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))

    faces = None
    if mesh.faces is not None:
        mapped = remap[mesh.faces]
        faces = mapped[(mapped >= 0).all(axis=1)]

    landmarks = {name: int(remap[i]) for name, i in mesh.landmarks.items() if remap[i] >= 0}
    return Mesh(vertices=mesh.vertices[kept], faces=faces, landmarks=landmarks)


def crop(mesh: Mesh, radius: float = DEFAULT_CROP_RADIUS) -> CropResult:
    """
    以鼻尖为球心裁剪（距离 ≤ radius 保留），再平移使质心位于原点

    Args:
        mesh: 大致正面朝 +z 的人脸网格
        radius: 球半径，mm

    Returns:
        CropResult
    """
    tip = nose_tip(mesh.vertices)
    d = point_distances(mesh.vertices, mesh.vertices[tip])
    kept = np.flatnonzero(d <= radius)
    if len(kept) == 0:
        raise EmptyResult(f"no vertex within {radius} mm of the nose tip")

    cropped = submesh(mesh, kept)
    shift = SimilarityTransform.translation(-cropped.vertices.mean(axis=0))
    logger.debug("crop: kept %d / %d vertices (radius %.1f mm)", len(kept), mesh.n_vertices, radius)
    return CropResult(
        mesh=shift.apply_mesh(cropped),
        kept=kept,
        transform=shift,
        nose_tip=tip,
    )


def crop_and_center(mesh: Mesh, radius: float = DEFAULT_CROP_RADIUS) -> Mesh:
    return crop(mesh, radius).mesh


def align_to_template(
    target: Mesh,
    template: np.ndarray,
    radius: Optional[float] = DEFAULT_CROP_RADIUS,
    crop_template: bool = False,
    icp_max_iter: int = 50,
    icp_tol: float = 1e-6,
) -> AlignmentResult:
    """
    把原始目标带到模板坐标系：裁剪去中心 -> 鼻尖重合 -> 刚性 ICP

    Args:
        target: 原始扫描
        template: (m, 3) 模板顶点（通常为模型平均脸）
        radius: 裁剪半径；None 表示不裁剪、只去中心
        crop_template: 是否也按半径裁剪模板参与 ICP 的点（模板坐标系不变）
        icp_max_iter, icp_tol: ICP 参数

    Returns:
        AlignmentResult，transform 作用于原始目标坐标
    """
    template = np.asarray(template, dtype=np.float64).reshape(-1, 3)
    if radius is None:
        kept = np.arange(target.n_vertices)
        shift = SimilarityTransform.translation(-target.vertices.mean(axis=0))
        centred = shift.apply_mesh(target)
    else:
        cropped = crop(target, radius)
        kept, shift, centred = cropped.kept, cropped.transform, cropped.mesh

    tmpl_tip = nose_tip(template)
    icp_points = template
    if crop_template and radius is not None:
        mask = point_distances(template, template[tmpl_tip]) <= radius
        icp_points = template[mask]

    coincide = SimilarityTransform.translation(template[tmpl_tip] - centred.vertices[nose_tip(centred.vertices)])
    moved = coincide.apply(centred.vertices)
    rigid = icp(moved, icp_points, max_iter=icp_max_iter, tol=icp_tol)

    total = shift.then(coincide).then(rigid.transform)
    logger.debug(
        "align: %d vertices, ICP %d iterations, rms %.4f mm",
        len(kept), rigid.iterations, rigid.errors[-1] if rigid.errors else float("nan"),
    )
    return AlignmentResult(
        mesh=rigid.transform.apply_mesh(centred.with_vertices(moved)),
        transform=total,
        kept=kept,
        icp=rigid,
    )
