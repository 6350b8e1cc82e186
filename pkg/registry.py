# registry.py
from __future__ import annotations

from typing import Callable, Dict, Generic, List, Optional, TypeVar

T = TypeVar("T")


class NamedRegistry(Generic[T]):
    """
    按 .name 索引的插件表，metric 和对应策略共用

    Args:
        kind: 报错里的类别名，如 "Metric"
        plural: 报错里可选项的称呼，如 "metrics"
    """

    def __init__(self, kind: str, plural: str):
        self.kind = kind
        self.plural = plural
        self._items: Dict[str, T] = {}

    def add(self, item: T) -> None:
        name = item.name
        if name in self._items:
            raise KeyError(f"{self.kind} '{name}' already registered.")
        self._items[name] = item

    def get(self, name: str) -> T:
        if name not in self._items:
            raise KeyError(
                f"{self.kind} '{name}' not registered. "
                f"Available {self.plural}: {list(self._items)}"
            )
        return self._items[name]

    def list(self) -> List[T]:
        return list(self._items.values())

    def decorator(self, wrap: Callable[[str, Callable], T], name: Optional[str] = None):
        """
        函数式注册：wrap(名字, 函数) 生成实例，函数本身原样返回
        """
        def deco(func: Callable):
            self.add(wrap(name or func.__name__, func))
            return func
        return deco
