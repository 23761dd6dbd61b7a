"""
Class-kind consistency

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import List

from ubdb.model.chain import ResolvedMachine
from ubdb.model.resolve import resolve
from ubdb.patterns.findings import ERROR, WARNING, LintFinding, dedupe
from ubdb.patterns.historical import historical_classes, is_move, own_vocabulary
from ubdb.utils.logger import get_logger

logger = get_logger()

_LINKED_KINDS = ("primary", "secondary")


def _introduced(machine: ResolvedMachine) -> List[str]:
    inherited = set(machine.abstract_variables)
    return [name for name in machine.class_names if name not in inherited]


def _kind(machine: ResolvedMachine, class_name: str) -> str:
    annotation = machine.annotation(class_name)
    return annotation.kind if annotation else "primary"


def classify_classes(chain) -> List[LintFinding]:
    """
    Check declared class kinds against the structure of the model.

    Findings:
        secondary-structure: a secondary class with no function to a primary
            or secondary class
        attribute-source: an attribute class that is the source of an
            association to a primary class
        historical-write: a historical class (or an attribute of it) assigned
            by an event that is not an atomic move into it
    """
    resolved = resolve(chain)
    findings: List[LintFinding] = []
    for machine in resolved.machines:
        for name in _introduced(machine):
            kind = _kind(machine, name)
            if kind == "secondary":
                findings.extend(_secondary(machine, name))
            elif kind == "attribute":
                findings.extend(_attribute_class(machine, name))
        for historical in historical_classes(machine):
            findings.extend(_historical_writes(machine, historical))
    findings = dedupe(findings)
    logger.debug(f"classify_classes: {len(findings)} finding(s)")
    return findings


def _secondary(machine: ResolvedMachine, name: str) -> List[LintFinding]:
    links = [
        d.name
        for d in machine.relations
        if d.typing.source == name
        and d.typing.kind.is_function
        and d.typing.target in machine.class_names
        and _kind(machine, d.typing.target) in _LINKED_KINDS
    ]
    if links:
        return []
    return [
        LintFinding(
            rule="secondary-structure",
            severity=WARNING,
            subject=name,
            message="secondary class has no function to a primary or secondary class",
            machine=machine.name,
        )
    ]


def _attribute_class(machine: ResolvedMachine, name: str) -> List[LintFinding]:
    findings = []
    for decl in machine.relations:
        target = decl.typing.target
        if decl.typing.source == name and target in machine.class_names and _kind(machine, target) == "primary":
            findings.append(
                LintFinding(
                    rule="attribute-source",
                    severity=WARNING,
                    subject=decl.name,
                    message=f"attribute class {name} is the source of an association to primary class {target}; "
                    f"declare it from {target} to {name}",
                    machine=machine.name,
                )
            )
    return findings


def _historical_writes(machine: ResolvedMachine, historical: str) -> List[LintFinding]:
    vocabulary = set(own_vocabulary(machine, historical))
    findings = []
    for event in machine.events:
        written = sorted(vocabulary.intersection(event.targets))
        if not written or is_move(machine, event, historical):
            continue
        findings.append(
            LintFinding(
                rule="historical-write",
                severity=ERROR,
                subject=event.name,
                message=f"writes {', '.join(written)} of historical class {historical} outside an atomic move",
                machine=machine.name,
            )
        )
    return findings
