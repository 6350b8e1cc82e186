# geometry/__init__.py
from .interfaces import SimilarityTransform, CropResult, IcpResult, AlignmentResult
from .spatial import SpatialIndex, point_distances
from .alignment import apply_transform, estimate_similarity, procrustes, icp, rigid_icp
from .preprocess import (
    DEFAULT_CROP_RADIUS,
    nose_tip,
    submesh,
    crop,
    crop_and_center,
    align_to_template,
)

__all__ = [
    "SimilarityTransform",
    "CropResult",
    "IcpResult",
    "AlignmentResult",
    "SpatialIndex",
    "point_distances",
    "apply_transform",
    "estimate_similarity",
    "procrustes",
    "icp",
    "rigid_icp",
    "DEFAULT_CROP_RADIUS",
    "nose_tip",
    "submesh",
    "crop",
    "crop_and_center",
    "align_to_template",
]
