# transfer/__init__.py
from .interfaces import ReindexedModel
from .annotation import (
    INITIAL_K,
    greedy_assignment,
    transfer_annotation,
    landmark_error,
    landmark_error_summary,
)

__all__ = [
    "ReindexedModel",
    "INITIAL_K",
    "greedy_assignment",
    "transfer_annotation",
    "landmark_error",
    "landmark_error_summary",
]
