"""
Proof obligations of a resolved chain

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from ubdb.model import ast
from ubdb.model.ast import conjunction, free_names
from ubdb.model.chain import ORIGIN_NEW, ResolvedChain, ResolvedEvent, ResolvedMachine

INV = "INV"
GRD = "GRD"
SIM = "SIM"
GLU = "GLU"
FEAS = "FEAS"

KINDS = (INV, GRD, SIM, GLU, FEAS)


@dataclass(frozen=True)
class ProofObligation:
    kind: str
    machine: str
    event: Optional[str] = None
    invariant_label: Optional[str] = None
    predicate: ast.Predicate = field(default_factory=lambda: ast.Truth(True), compare=False, repr=False)
    abstract: Optional[str] = None

    @property
    def key(self) -> Tuple[str, str, Optional[str], Optional[str]]:
        return (self.kind, self.machine, self.event, self.invariant_label)

    def describe(self) -> str:
        parts = [self.machine]
        if self.event:
            parts.append(self.event)
        if self.invariant_label:
            parts.append(self.invariant_label)
        return "/".join(parts)


def machine_obligations(machine: ResolvedMachine) -> List[ProofObligation]:
    """INV per (event, invariant) and FEAS per event"""
    obligations: List[ProofObligation] = []
    for event in machine.events:
        for invariant in machine.invariants:
            obligations.append(
                ProofObligation(INV, machine.name, event.name, invariant.label, invariant.predicate)
            )
    for event in machine.events:
        obligations.append(ProofObligation(FEAS, machine.name, event.name, None, _guard(event)))
    return obligations


def refinement_obligations(abstract: ResolvedMachine, concrete: ResolvedMachine) -> List[ProofObligation]:
    """GRD and SIM per refined event, SIM per new event, GLU per (event, touched gluing invariant)"""
    obligations: List[ProofObligation] = []
    for event in concrete.events:
        if event.origin != ORIGIN_NEW:
            base = abstract.event(event.abstract)
            obligations.append(
                ProofObligation(
                    GRD, concrete.name, event.name, None, _guard(base) if base else ast.Truth(True), abstract.name
                )
            )
        obligations.append(ProofObligation(SIM, concrete.name, event.name, None, ast.Truth(True), abstract.name))
    for event in concrete.events:
        base = abstract.event(event.abstract) if event.abstract else None
        written = set(event.targets) | (set(base.targets) if base else set())
        for invariant in concrete.gluing:
            if written & free_names(invariant.predicate):
                obligations.append(
                    ProofObligation(
                        GLU, concrete.name, event.name, invariant.label, invariant.predicate, abstract.name
                    )
                )
    return obligations


def generate_obligations(chain: ResolvedChain) -> List[ProofObligation]:
    """Every obligation of the chain, machine by machine in chain order"""
    obligations: List[ProofObligation] = []
    for machine in chain.machines:
        obligations.extend(machine_obligations(machine))
        if machine.abstract is not None:
            obligations.extend(refinement_obligations(chain.machine(machine.abstract), machine))
    return obligations


def _guard(event: Optional[ResolvedEvent]) -> ast.Predicate:
    if event is None:
        return ast.Truth(True)
    return conjunction(g.predicate for g in event.guards)
