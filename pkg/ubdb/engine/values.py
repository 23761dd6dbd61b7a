"""
Finite values, scopes and states

A value is an Atom, a bool, a frozenset of values or a 2-tuple (pair).

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Tuple, Union

from ubdb.config import get_default_scope_bounds


class Atom:
    """Carrier-set element, identified by set name and 1-based index"""

    __slots__ = ("carrier", "index", "_hash")

    def __init__(self, carrier: str, index: int):
        self.carrier = carrier
        self.index = index
        self._hash = hash((carrier, index))

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        return (
            isinstance(other, Atom) and self.index == other.index and self.carrier == other.carrier
        )

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Atom") -> bool:
        return (self.carrier, self.index) < (other.carrier, other.index)

    def __repr__(self) -> str:
        return f"Atom({self.carrier!r}, {self.index})"

    def __str__(self) -> str:
        return f"{self.carrier}.{self.index}"

    def __reduce__(self):
        return (Atom, (self.carrier, self.index))


Value = Union[Atom, bool, FrozenSet, Tuple]

EMPTY: FrozenSet = frozenset()


def value_key(value: Value) -> tuple:
    """Total order over values, used for every deterministic iteration"""
    if isinstance(value, Atom):
        return (0, value.carrier, value.index)
    if isinstance(value, bool):
        return (1, int(value))
    if isinstance(value, frozenset):
        return (2, len(value), tuple(sorted(value_key(v) for v in value)))
    if isinstance(value, tuple):
        return (3, value_key(value[0]), value_key(value[1]))
    raise TypeError(f"not a value: {value!r}")


def sorted_values(values: Iterable[Value]) -> list:
    return sorted(values, key=value_key)


def format_value(value: Value) -> str:
    """Render a value in DSL expression syntax (parse_value reads it back)"""
    if isinstance(value, Atom):
        return str(value)
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, frozenset):
        return "{" + ", ".join(format_value(v) for v in sorted_values(value)) + "}"
    if isinstance(value, tuple):
        left, right = value
        right_text = format_value(right)
        if isinstance(right, tuple):
            right_text = f"({right_text})"
        return f"{format_value(left)} |-> {right_text}"
    raise TypeError(f"not a value: {value!r}")


def atoms_of(value: Value, into: Optional[set] = None) -> set:
    """Every atom occurring in a value"""
    found = set() if into is None else into
    if isinstance(value, Atom):
        found.add(value)
    elif isinstance(value, frozenset):
        for element in value:
            atoms_of(element, found)
    elif isinstance(value, tuple):
        atoms_of(value[0], found)
        atoms_of(value[1], found)
    return found


def relabel(value: Value, mapping: Mapping[Atom, Atom]) -> Value:
    """Value with its atoms renamed; atoms missing from the mapping stay"""
    if isinstance(value, Atom):
        return mapping.get(value, value)
    if isinstance(value, frozenset):
        return frozenset(relabel(v, mapping) for v in value)
    if isinstance(value, tuple):
        return (relabel(value[0], mapping), relabel(value[1], mapping))
    return value


def is_function(relation: FrozenSet) -> bool:
    seen = set()
    for pair in relation:
        if pair[0] in seen:
            return False
        seen.add(pair[0])
    return True


@lru_cache(maxsize=None)
def carrier_atoms(carrier: str, count: int) -> Tuple[Atom, ...]:
    return tuple(Atom(carrier, i) for i in range(1, count + 1))


class Scope:
    """Instance bound per carrier set"""

    __slots__ = ("bounds", "_map")

    def __init__(self, bounds: Union[Mapping[str, int], Iterable[Tuple[str, int]]] = ()):
        items = bounds.items() if isinstance(bounds, Mapping) else bounds
        pairs = tuple(sorted((str(k), int(v)) for k, v in items))
        for name, count in pairs:
            if count < 0:
                raise ValueError(f"scope bound for {name} must be >= 0, got {count}")
        self.bounds = pairs
        self._map = dict(pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Scope) and self.bounds == other.bounds

    def __hash__(self) -> int:
        return hash(self.bounds)

    def __repr__(self) -> str:
        return f"Scope({dict(self.bounds)!r})"

    def __str__(self) -> str:
        return ", ".join(f"{k}={v}" for k, v in self.bounds) or "(empty)"

    def __contains__(self, carrier: str) -> bool:
        return carrier in self._map

    def bound(self, carrier: str) -> int:
        return self._map[carrier]

    def atoms(self, carrier: str) -> Tuple[Atom, ...]:
        return carrier_atoms(carrier, self._map[carrier])

    def as_dict(self) -> Dict[str, int]:
        return dict(self.bounds)

    def with_overrides(self, overrides: Optional[Mapping[str, int]]) -> "Scope":
        merged = dict(self.bounds)
        merged.update(overrides or {})
        return Scope(merged)

    @classmethod
    def uniform(cls, carriers: Iterable[str], count: int) -> "Scope":
        return cls({c: count for c in carriers})

    @classmethod
    def for_machine(cls, machine, overrides: Optional[Mapping[str, int]] = None) -> "Scope":
        """Default bounds (class carriers vs. value carriers) plus overrides"""
        defaults = get_default_scope_bounds()
        class_carriers = set(machine.class_carriers())
        bounds = {
            c: defaults["class"] if c in class_carriers else defaults["value"]
            for c in machine.carriers
        }
        bounds.update(overrides or {})
        return cls(bounds)

    @classmethod
    def for_chain(cls, chain, overrides: Optional[Mapping[str, int]] = None) -> "Scope":
        defaults = get_default_scope_bounds()
        class_carriers = set()
        carriers = []
        for machine in chain.machines:
            class_carriers.update(machine.class_carriers())
            carriers.extend(c for c in machine.carriers if c not in carriers)
        bounds = {
            c: defaults["class"] if c in class_carriers else defaults["value"] for c in carriers
        }
        bounds.update(overrides or {})
        return cls(bounds)


class State:
    """Immutable assignment of values to variables, in a fixed variable order"""

    __slots__ = ("names", "values", "_hash", "_index")

    def __init__(self, names: Tuple[str, ...], values: Tuple[Value, ...]):
        if len(names) != len(values):
            raise ValueError("state names and values differ in length")
        self.names = tuple(names)
        self.values = tuple(values)
        self._hash = hash(self.values)
        self._index = None

    def _positions(self) -> Dict[str, int]:
        if self._index is None:
            self._index = {n: i for i, n in enumerate(self.names)}
        return self._index

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, State)
            and self._hash == other._hash
            and self.values == other.values
            and self.names == other.names
        )

    def __hash__(self) -> int:
        return self._hash

    def __getitem__(self, name: str) -> Value:
        return self.values[self._positions()[name]]

    def __contains__(self, name: str) -> bool:
        return name in self._positions()

    def get(self, name: str, default=None):
        position = self._positions().get(name)
        return default if position is None else self.values[position]

    def __repr__(self) -> str:
        return f"State({self.as_text()})"

    def items(self):
        return zip(self.names, self.values)

    def as_dict(self) -> Dict[str, Value]:
        return dict(zip(self.names, self.values))

    def as_text(self) -> str:
        return ", ".join(f"{n} = {format_value(v)}" for n, v in zip(self.names, self.values))

    def updated(self, changes: Mapping[str, Value]) -> "State":
        if not changes:
            return self
        positions = self._positions()
        values = list(self.values)
        for name, value in changes.items():
            values[positions[name]] = value
        return State(self.names, tuple(values))

    def relabelled(self, mapping: Mapping[Atom, Atom]) -> "State":
        if not mapping:
            return self
        return State(self.names, tuple(relabel(v, mapping) for v in self.values))

    def project(self, names: Iterable[str]) -> "State":
        names = tuple(names)
        return State(names, tuple(self[n] for n in names))

    @classmethod
    def empty(cls, names: Iterable[str]) -> "State":
        """All class sets and relations empty"""
        names = tuple(names)
        return cls(names, tuple(EMPTY for _ in names))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Value], names: Optional[Iterable[str]] = None) -> "State":
        names = tuple(names) if names is not None else tuple(mapping)
        return cls(names, tuple(mapping[n] for n in names))
