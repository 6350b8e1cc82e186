# mesh_io/__init__.py
from .interfaces import Mesh, IMeshFormat, PathLike
from .registry import add_format, get_format, list_formats
from .obj import ObjFormat, parse_obj
from .ply import PlyFormat, parse_ply
from .landmarks import LANDMARK_SUFFIX, read_landmarks, write_landmarks, sidecar_path
from .files import read_mesh, write_mesh
from .model_container import read_model, write_model, encode_model, decode_model
from .atomic import atomic_write

add_format(ObjFormat())
add_format(PlyFormat())

__all__ = [
    "Mesh",
    "IMeshFormat",
    "PathLike",
    "add_format",
    "get_format",
    "list_formats",
    "ObjFormat",
    "PlyFormat",
    "parse_obj",
    "parse_ply",
    "LANDMARK_SUFFIX",
    "read_landmarks",
    "write_landmarks",
    "sidecar_path",
    "read_mesh",
    "write_mesh",
    "read_model",
    "write_model",
    "encode_model",
    "decode_model",
    "atomic_write",
]
