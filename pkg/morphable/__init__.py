# morphable/__init__.py
from .interfaces import TrainingSet, SlcModel, PcaModel, MorphableModel
from .displacement import build_displacements
from .slc import SlcLearner, learn_slc, sparsity, update_coefficients, update_directions, USE_NUMBA
from .pca import learn_pca, max_pca_components
from .synthesis import synthesize, components_at_vertex, deform

__all__ = [
    "TrainingSet",
    "SlcModel",
    "PcaModel",
    "MorphableModel",
    "build_displacements",
    "SlcLearner",
    "learn_slc",
    "sparsity",
    "update_coefficients",
    "update_directions",
    "USE_NUMBA",
    "learn_pca",
    "max_pca_components",
    "synthesize",
    "components_at_vertex",
    "deform",
]
