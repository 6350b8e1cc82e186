# fitting/registry.py
from __future__ import annotations

from typing import Callable, List, Optional

import numpy as np

from registry import NamedRegistry

from .interfaces import Correspondence, ICorrespondenceStrategy


_STRATEGIES: NamedRegistry[ICorrespondenceStrategy] = NamedRegistry("Correspondence", "strategies")


class FunctionStrategy(ICorrespondenceStrategy):
    """把 (template, target) -> Correspondence 函数包装成策略"""
    def __init__(self, name: str, func: Callable[[np.ndarray, np.ndarray], Correspondence]):
        self._name = name
        self._func = func

    @property
    def name(self) -> str:
        return self._name

    def match(self, template: np.ndarray, target: np.ndarray) -> Correspondence:
        return self._func(template, target)


def register_correspondence(name: Optional[str] = None):
    """装饰器：注册函数式对应策略"""
    return _STRATEGIES.decorator(FunctionStrategy, name)


def add_correspondence(strategy: ICorrespondenceStrategy):
    _STRATEGIES.add(strategy)


def get_correspondence(name: str) -> ICorrespondenceStrategy:
    """获取已注册的对应策略"""
    return _STRATEGIES.get(name)


def list_correspondences() -> List[ICorrespondenceStrategy]:
    return _STRATEGIES.list()
