# exceptions.py
"""
统一异常定义

所有异常都继承 Slc3dmmError，同时继承最接近的内置异常，
调用方既可以按包捕获，也可以按 ValueError / IndexError 等捕获。
"""
from __future__ import annotations

from typing import Optional


class Slc3dmmError(Exception):
    """所有自定义异常的基类"""


# ---------------------------
# 1) 文件读写
# ---------------------------
class ParseError(Slc3dmmError, ValueError):
    """网格/标注文件格式错误，带行号或字节偏移"""

    def __init__(self, message: str, line: Optional[int] = None, offset: Optional[int] = None):
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif offset is not None:
            where = f" (byte {offset})"
        super().__init__(f"{message}{where}")
        self.line = line
        self.offset = offset


class UnsupportedFormat(Slc3dmmError, ValueError):
    pass


class MeshIndexError(Slc3dmmError, IndexError):
    """面或标注引用了不存在的顶点"""


class MeshIoError(Slc3dmmError, OSError):
    pass


class ModelFormatError(Slc3dmmError, ValueError):
    """模型二进制容器内容非法"""


class BadMagic(ModelFormatError):
    pass


class DimensionMismatch(ModelFormatError):
    pass


# ---------------------------
# 2) 几何 / 数值
# ---------------------------
class EmptyResult(Slc3dmmError, ValueError):
    pass


class EmptyInput(Slc3dmmError, ValueError):
    pass


class DegenerateConfiguration(Slc3dmmError, ArithmeticError):
    pass


class SingularSystem(Slc3dmmError, ArithmeticError):
    pass


class InvalidHyperparam(Slc3dmmError, ValueError):
    pass


class KTooLarge(Slc3dmmError, ValueError):
    pass


class TopologyMismatch(Slc3dmmError, ValueError):
    """训练网格之间顶点数/拓扑不一致"""

    def __init__(self, message: str, source: Optional[str] = None):
        super().__init__(message if source is None else f"{message}: {source}")
        self.source = source


# ---------------------------
# 3) 标注迁移
# ---------------------------
class TargetTooSmall(Slc3dmmError, ValueError):
    pass


class NoSharedLandmarks(Slc3dmmError, KeyError):
    pass


# ---------------------------
# 4) 配置
# ---------------------------
class ConfigError(Slc3dmmError, ValueError):
    pass


# CLI 退出码分类：数据错误返回 3
DATA_ERRORS = (
    ParseError,
    UnsupportedFormat,
    MeshIndexError,
    ModelFormatError,
    TopologyMismatch,
    EmptyResult,
    EmptyInput,
    TargetTooSmall,
)
