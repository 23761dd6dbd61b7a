"""
Interchangeable atoms

A carrier set none of whose atoms is written as a literal anywhere in the
machines is symmetric: renaming its atoms maps reachable states to
reachable states and leaves every guard, action and invariant verdict
unchanged. Exploration uses this twice. Parameter search tries only the
lowest atom of such a carrier that is still unused, and every new state is
relabelled so that each carrier's atoms are numbered in the order of a
signature computed from where they occur. States that differ only by such
a renaming then usually collide. Every class of renamed states is still
visited at least once.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from ubdb.engine.values import Atom, Scope, Value, atoms_of, relabel, sorted_values
from ubdb.model import ast
from ubdb.model.chain import ResolvedMachine

# colour refinement stops earlier when no class splits any more
REFINEMENT_ROUNDS = 4

Mapping_ = Dict[Atom, Atom]


def _literal_carriers(node, found: Set[str]) -> None:
    if isinstance(node, ast.AtomLit):
        found.add(node.carrier)
        return
    for child in ast.children(node):
        _literal_carriers(child, found)


def literal_carriers(machines: Iterable[ResolvedMachine]) -> FrozenSet[str]:
    """Carrier sets with at least one atom written literally in the machines"""
    found: Set[str] = set()
    for machine in machines:
        roots = [c.value for c in machine.constants]
        roots += [a.predicate for a in machine.axioms]
        roots += [i.predicate for i in machine.invariants + machine.gluing]
        for event in machine.events:
            roots += [p.typing for p in event.parameters]
            roots += [g.predicate for g in event.guards]
            roots += [a.expression for a in event.actions]
        for root in roots:
            _literal_carriers(root, found)
    return frozenset(found)


def compose(outer: Mapping[Atom, Atom], inner: Mapping[Atom, Atom]) -> Mapping_:
    """x -> outer(inner(x)), without identity entries"""
    result = {}
    for atom in set(outer) | set(inner):
        middle = inner.get(atom, atom)
        image = outer.get(middle, middle)
        if image != atom:
            result[atom] = image
    return result


class Symmetry:
    """Renaming reductions over the symmetric carriers of a scope"""

    def __init__(self, carriers: Iterable[str]):
        self.carriers = frozenset(carriers)

    @classmethod
    def for_machines(cls, scope: Scope, machines: Iterable[ResolvedMachine]) -> Optional["Symmetry"]:
        """None when no carrier of the scope has two atoms and no literal"""
        named = literal_carriers(machines)
        carriers = [c for c, bound in scope.bounds if bound > 1 and c not in named]
        return cls(carriers) if carriers else None

    # --- parameter search ----------------------------------------------------

    def narrowing(self, values: Iterable[Value]):
        """
        Candidate filter for one state: an atom of a symmetric carrier that
        occurs neither in the state nor in an earlier parameter is kept only
        when it is the first such atom of its carrier.
        """
        used: Set[Atom] = set()
        for value in values:
            atoms_of(value, used)
        carriers = self.carriers

        def narrow(candidates: List[Value], earlier: List[Value]) -> List[Value]:
            taken = used
            if earlier:
                taken = set(used)
                for value in earlier:
                    atoms_of(value, taken)
            seen_fresh: Set[str] = set()
            kept = []
            for value in candidates:
                if isinstance(value, Atom) and value.carrier in carriers and value not in taken:
                    if value.carrier in seen_fresh:
                        continue
                    seen_fresh.add(value.carrier)
                kept.append(value)
            return kept

        return narrow

    # --- relabelling ---------------------------------------------------------

    def canonical(self, values: Tuple[Value, ...]) -> Tuple[Tuple[Value, ...], Optional[Mapping_]]:
        """
        Relabelled values and the mapping from the new atoms back to the old ones.

        The mapping is None when nothing moves.
        """
        facts: List[Tuple[int, Tuple[Atom, ...]]] = []
        for slot, value in enumerate(values):
            if isinstance(value, frozenset):
                for element in value:
                    facts.append((slot, _leaves(element)))
            elif isinstance(value, (Atom, tuple)):
                facts.append((slot, _leaves(value)))

        carriers = self.carriers
        occurrences: Dict[Atom, List[Tuple[int, int]]] = {}
        for index, (_, leaves) in enumerate(facts):
            for position, atom in enumerate(leaves):
                if atom.carrier in carriers:
                    occurrences.setdefault(atom, []).append((index, position))
        if not occurrences:
            return values, None

        colour: Dict[Atom, tuple] = {atom: ("m", 0) for atom in occurrences}
        classes = len({(a.carrier, colour[a]) for a in occurrences})
        for _ in range(REFINEMENT_ROUNDS):
            signature = {}
            for atom, places in occurrences.items():
                items = []
                for index, position in places:
                    slot, leaves = facts[index]
                    items.append(
                        (
                            slot,
                            position,
                            tuple(
                                ("s",) if j == position else colour.get(b, ("f", b.carrier, b.index))
                                for j, b in enumerate(leaves)
                            ),
                        )
                    )
                items.sort()
                signature[atom] = (colour[atom], tuple(items))
            ranks = {sig: rank for rank, sig in enumerate(sorted(set(signature.values())))}
            colour = {atom: ("m", ranks[sig]) for atom, sig in signature.items()}
            refined = len({(a.carrier, colour[a]) for a in occurrences})
            if refined == classes or refined == len(occurrences):
                break
            classes = refined

        by_carrier: Dict[str, List[Atom]] = {}
        for atom in occurrences:
            by_carrier.setdefault(atom.carrier, []).append(atom)
        forward: Mapping_ = {}
        for carrier, present in by_carrier.items():
            present.sort(key=lambda a: (colour[a], a.index))
            present_set = set(present)
            bound = max(a.index for a in present)
            # unused atoms keep their relative order after the used ones
            spare = [Atom(carrier, i) for i in range(1, bound + 1) if Atom(carrier, i) not in present_set]
            for new_index, atom in enumerate(present + spare, start=1):
                if atom.index != new_index:
                    forward[atom] = Atom(carrier, new_index)
        if not forward:
            return values, None
        backward = {new: old for old, new in forward.items()}
        return tuple(relabel(v, forward) for v in values), backward


def _leaves(value: Value) -> Tuple[Atom, ...]:
    """Atoms of one fact in a fixed position order"""
    if isinstance(value, Atom):
        return (value,)
    if isinstance(value, tuple):
        return _leaves(value[0]) + _leaves(value[1])
    if isinstance(value, frozenset):
        return tuple(a for v in sorted_values(value) for a in _leaves(v))
    return ()
