"""
slc3dmm：稀疏局部一致形变模型的学习、非刚性拟合、标注迁移与评价

子包之间按顶层名绝对导入（from mesh_io import read_mesh），安装后需把包目录放进 sys.path。
"""
import sys
from pathlib import Path

__version__ = "0.1.0"

project_root = Path(__file__).parent.resolve()
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from .slc_batch import main  # noqa: E402

__all__ = ["main", "__version__"]
