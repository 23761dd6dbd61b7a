"""
Set types assigned to expressions by the typechecker

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass
from typing import Optional, Union


@dataclass(frozen=True)
class AtomType:
    carrier: str

    def __str__(self) -> str:
        return self.carrier


@dataclass(frozen=True)
class PairType:
    left: "SetType"
    right: "SetType"

    def __str__(self) -> str:
        return f"{self.left} ** {self.right}"


@dataclass(frozen=True)
class PowType:
    element: "SetType"

    def __str__(self) -> str:
        return f"POW({self.element})"


@dataclass(frozen=True)
class AnyType:
    """Element type of the empty set literal; unifies with everything"""

    def __str__(self) -> str:
        return "?"


SetType = Union[AtomType, PairType, PowType, AnyType]


def unify(a: Optional[SetType], b: Optional[SetType]) -> Optional[SetType]:
    """Most specific common type, or None when the types clash"""
    if a is None or b is None:
        return None
    if isinstance(a, AnyType):
        return b
    if isinstance(b, AnyType):
        return a
    if isinstance(a, AtomType) and isinstance(b, AtomType):
        return a if a.carrier == b.carrier else None
    if isinstance(a, PairType) and isinstance(b, PairType):
        left = unify(a.left, b.left)
        right = unify(a.right, b.right)
        if left is None or right is None:
            return None
        return PairType(left, right)
    if isinstance(a, PowType) and isinstance(b, PowType):
        element = unify(a.element, b.element)
        return None if element is None else PowType(element)
    return None


def relation_type(source: SetType, target: SetType) -> PowType:
    return PowType(PairType(source, target))


def is_relation(t: Optional[SetType]) -> bool:
    return isinstance(t, PowType) and isinstance(t.element, (PairType, AnyType))
