# synth/__init__.py
from .interfaces import FaceSpec, DegradedMesh, SyntheticDataset
from .generator import (
    LANDMARK_PARAMS,
    generate,
    grid_coordinates,
    grid_faces,
    grid_landmarks,
    grid_vertex,
    region_masks,
    identity_surface,
    expression_displacement,
)
from .degrade import degrade, upsample
from .dataset import make_dataset, export_dataset, random_identity, random_expression

__all__ = [
    "FaceSpec",
    "DegradedMesh",
    "SyntheticDataset",
    "LANDMARK_PARAMS",
    "generate",
    "grid_coordinates",
    "grid_faces",
    "grid_landmarks",
    "grid_vertex",
    "region_masks",
    "identity_surface",
    "expression_displacement",
    "degrade",
    "upsample",
    "make_dataset",
    "export_dataset",
    "random_identity",
    "random_expression",
]
