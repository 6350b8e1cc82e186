# mesh_io/registry.py
from __future__ import annotations

from pathlib import Path
from typing import Dict, List

from exceptions import UnsupportedFormat

from .interfaces import IMeshFormat


_FORMAT_REGISTRY: Dict[str, IMeshFormat] = {}


def add_format(fmt: IMeshFormat) -> None:
    """
    注册网格格式实例，按后缀索引
    """
    for suffix in fmt.suffixes:
        suffix = suffix.lower()
        if suffix in _FORMAT_REGISTRY:
            raise KeyError(f"Suffix '{suffix}' already registered by '{_FORMAT_REGISTRY[suffix].name}'.")
        _FORMAT_REGISTRY[suffix] = fmt


def get_format(path_or_suffix: str | Path) -> IMeshFormat:
    """按文件路径或后缀获取格式"""
    text = str(path_or_suffix)
    suffix = text.lower() if text.startswith(".") else Path(text).suffix.lower()
    if suffix not in _FORMAT_REGISTRY:
        raise UnsupportedFormat(
            f"Mesh suffix '{suffix}' not supported. "
            f"Available suffixes: {sorted(_FORMAT_REGISTRY)}"
        )
    return _FORMAT_REGISTRY[suffix]


def list_formats() -> List[IMeshFormat]:
    """列出所有已注册的格式（去重）"""
    seen: Dict[str, IMeshFormat] = {}
    for fmt in _FORMAT_REGISTRY.values():
        seen.setdefault(fmt.name, fmt)
    return list(seen.values())
