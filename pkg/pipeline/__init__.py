# pipeline/__init__.py
from .interfaces import PipelineConfig, PATH_KEYS
from .commands import (
    COMMANDS,
    BatchResult,
    cmd_synth,
    cmd_learn,
    cmd_fit,
    cmd_transfer,
    cmd_eval,
    cmd_sweep,
    load_training_set,
    mesh_files,
)

__all__ = [
    "PipelineConfig",
    "PATH_KEYS",
    "COMMANDS",
    "BatchResult",
    "cmd_synth",
    "cmd_learn",
    "cmd_fit",
    "cmd_transfer",
    "cmd_eval",
    "cmd_sweep",
    "load_training_set",
    "mesh_files",
]
