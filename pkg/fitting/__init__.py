# fitting/__init__.py
from .interfaces import Correspondence, ICorrespondenceStrategy, FitParams, FitResult
from .registry import (
    register_correspondence,
    add_correspondence,
    get_correspondence,
    list_correspondences,
)
from .correspondence import correspond, nearest_correspond
from .deformation import (
    WEIGHT_FLOOR,
    regularizer,
    solve_coefficients,
    solve_deformation,
    deformation_objective,
)
from .error import per_vertex_error
from .engine import NonRigidFitter, nrf

__all__ = [
    "Correspondence",
    "ICorrespondenceStrategy",
    "FitParams",
    "FitResult",
    "register_correspondence",
    "add_correspondence",
    "get_correspondence",
    "list_correspondences",
    "correspond",
    "nearest_correspond",
    "WEIGHT_FLOOR",
    "regularizer",
    "solve_coefficients",
    "solve_deformation",
    "deformation_objective",
    "per_vertex_error",
    "NonRigidFitter",
    "nrf",
]
