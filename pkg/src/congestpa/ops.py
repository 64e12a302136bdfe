"""The closed set of aggregation operators.

Each operator works on an accumulator that fits in at most two payload words.
``first`` keeps (node id, value) and resolves to the value held by the
smallest node id, so its accumulator is two words; all others use one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .sim import WORD_MASK

OPERATORS = ("min", "max", "sum", "or", "and", "first")


@dataclass(frozen=True)
class Operator:
    name: str
    combine: Callable
    words: int

    def lift(self, node: int, value: int):
        value = int(value) & WORD_MASK
        return (node, value) if self.name == "first" else value

    def finish(self, acc) -> int:
        return acc[1] if self.name == "first" else acc

    def pack(self, acc) -> tuple:
        return tuple(acc) if self.name == "first" else (acc,)

    def unpack(self, words):
        return (words[0], words[1]) if self.name == "first" else words[0]

    @property
    def identity(self):
        """Accumulator that leaves any other unchanged under ``combine``."""
        return _IDENTITY[self.name]


def _first(a, b):
    return a if a[0] <= b[0] else b


_TABLE = {
    "min": Operator("min", min, 1),
    "max": Operator("max", max, 1),
    "sum": Operator("sum", lambda a, b: (a + b) & WORD_MASK, 1),
    "or": Operator("or", lambda a, b: a | b, 1),
    "and": Operator("and", lambda a, b: a & b, 1),
    "first": Operator("first", _first, 2),
}


_IDENTITY = {
    "min": WORD_MASK,
    "max": 0,
    "sum": 0,
    "or": 0,
    "and": WORD_MASK,
    "first": (WORD_MASK, 0),
}


class Carry:
    """Pseudo-operator that forwards a tuple of words unchanged; used to
    spread messages rather than aggregate them."""

    name = "carry"

    def __init__(self, words: int = 1):
        self.words = words

    @staticmethod
    def combine(a, b):
        return a

    @staticmethod
    def pack(acc):
        return tuple(acc)

    @staticmethod
    def unpack(words):
        return tuple(words)


class PairOp:
    """Two independent one-word operators side by side."""

    words = 2

    def __init__(self, a, b):
        self.a, self.b = get_op(a), get_op(b)
        self.name = f"{self.a.name}+{self.b.name}"

    def combine(self, x, y):
        return (self.a.combine(x[0], y[0]), self.b.combine(x[1], y[1]))

    def lift(self, node, value):
        return (self.a.lift(node, value[0]), self.b.lift(node, value[1]))

    def finish(self, acc):
        return acc

    @staticmethod
    def pack(acc):
        return tuple(acc)

    @staticmethod
    def unpack(words):
        return (words[0], words[1])

    @property
    def identity(self):
        return (self.a.identity, self.b.identity)


def get_op(name) -> Operator:
    if isinstance(name, Operator):
        return name
    try:
        return _TABLE[name]
    except KeyError:
        raise ValueError(f"unknown operator {name!r}; choose from {OPERATORS}") from None
