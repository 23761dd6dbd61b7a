"""
Resolved refinement chain: each machine's effective vocabulary

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from ubdb.model.ast import (
    Action,
    Axiom,
    ClassAnnotation,
    ClassTyping,
    Constant,
    Guard,
    Invariant,
    Machine,
    Parameter,
    RefinementChain,
    RelationTyping,
    VariableDecl,
    free_names,
)

ORIGIN_NEW = "new"
ORIGIN_INHERITED = "inherited"
ORIGIN_EXTENDS = "extends"
ORIGIN_REFINES = "refines"


@dataclass(frozen=True)
class ResolvedEvent:
    """Event with extends links expanded into its full parameter/guard/action lists"""

    name: str
    kind: str
    class_owner: Optional[str]
    parameters: Tuple[Parameter, ...]
    guards: Tuple[Guard, ...]
    actions: Tuple[Action, ...]
    origin: str = ORIGIN_NEW
    abstract: Optional[str] = None

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    @property
    def targets(self) -> Tuple[str, ...]:
        return tuple(a.target for a in self.actions)

    def action_for(self, variable: str) -> Optional[Action]:
        for action in self.actions:
            if action.target == variable:
                return action
        return None

    def reads(self) -> frozenset:
        names = set()
        for parameter in self.parameters:
            names |= free_names(parameter.typing)
        for guard in self.guards:
            names |= free_names(guard.predicate)
        for action in self.actions:
            names |= free_names(action.expression)
        return frozenset(names - set(self.parameter_names))


@dataclass(frozen=True)
class ResolvedMachine:
    name: str
    abstract: Optional[str]
    layer: Optional[str]
    contexts: Tuple[str, ...]
    carriers: Tuple[str, ...]
    constants: Tuple[Constant, ...]
    axioms: Tuple[Axiom, ...]
    variables: Tuple[VariableDecl, ...]
    annotations: Tuple[ClassAnnotation, ...]
    removed: Tuple[str, ...]
    abstract_variables: Tuple[str, ...]
    typing_invariants: Tuple[Invariant, ...]
    declared_invariants: Tuple[Invariant, ...]
    gluing: Tuple[Invariant, ...]
    events: Tuple[ResolvedEvent, ...]
    source: Machine = field(compare=False, repr=False, default=None)

    @property
    def invariants(self) -> Tuple[Invariant, ...]:
        return self.typing_invariants + self.declared_invariants

    @property
    def variable_names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def class_names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.is_class)

    @property
    def relations(self) -> Tuple[VariableDecl, ...]:
        return tuple(v for v in self.variables if isinstance(v.typing, RelationTyping))

    def variable(self, name: str) -> Optional[VariableDecl]:
        for decl in self.variables:
            if decl.name == name:
                return decl
        return None

    def event(self, name: str) -> Optional[ResolvedEvent]:
        for event in self.events:
            if event.name == name:
                return event
        return None

    def annotation(self, class_name: str) -> Optional[ClassAnnotation]:
        for annotation in self.annotations:
            if annotation.class_name == class_name:
                return annotation
        return None

    def invariant(self, label: str) -> Optional[Invariant]:
        for invariant in self.invariants + self.gluing:
            if invariant.label == label:
                return invariant
        return None

    def carrier_of(self, name: str) -> Optional[str]:
        """Carrier set behind a class name, or the name itself for a carrier"""
        if name in self.carriers:
            return name
        decl = self.variable(name)
        if decl is not None and isinstance(decl.typing, ClassTyping):
            return decl.typing.carrier
        return None

    def supertypes(self, class_name: str) -> Tuple[str, ...]:
        """Ancestors of a class, nearest first"""
        chain = []
        seen = {class_name}
        current = self.annotation(class_name)
        while current is not None and current.supertype and current.supertype not in seen:
            chain.append(current.supertype)
            seen.add(current.supertype)
            current = self.annotation(current.supertype)
        return tuple(chain)

    def class_carriers(self) -> Tuple[str, ...]:
        """Carrier sets that type at least one class, in carrier order"""
        used = {v.typing.carrier for v in self.variables if isinstance(v.typing, ClassTyping)}
        return tuple(c for c in self.carriers if c in used)

    def constant_map(self) -> Dict[str, Constant]:
        return {c.name: c for c in self.constants}


@dataclass(frozen=True)
class ResolvedChain:
    chain: RefinementChain
    machines: Tuple[ResolvedMachine, ...]

    def machine(self, name: str) -> Optional[ResolvedMachine]:
        for machine in self.machines:
            if machine.name == name:
                return machine
        return None

    @property
    def last(self) -> Optional[ResolvedMachine]:
        return self.machines[-1] if self.machines else None

    def refinement_steps(self) -> Tuple[Tuple[ResolvedMachine, ResolvedMachine], ...]:
        steps = []
        for machine in self.machines:
            if machine.abstract is not None:
                steps.append((self.machine(machine.abstract), machine))
        return tuple(steps)
