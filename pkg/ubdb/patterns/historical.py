"""
Historical-data pattern check

A historical class is an archive: instances leave a live class and enter the
historical one within a single event, and attributes that only exist on the
archive are filled in by that same event.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import List, Optional, Sequence

from ubdb.model import ast
from ubdb.model.chain import ResolvedEvent, ResolvedMachine
from ubdb.model.resolve import resolve
from ubdb.patterns.findings import ERROR, INFO, WARNING, LintFinding, dedupe


def historical_classes(machine: ResolvedMachine) -> List[str]:
    return [a.class_name for a in machine.annotations if a.kind == "historical"]


def live_classes(machine: ResolvedMachine, historical: str) -> List[str]:
    """Non-historical classes sharing the carrier set of a historical class"""
    carrier = machine.carrier_of(historical)
    result = []
    for name in machine.class_names:
        annotation = machine.annotation(name)
        if annotation is not None and annotation.kind == "historical":
            continue
        if machine.carrier_of(name) == carrier:
            result.append(name)
    return result


def _grows(action: ast.Action, name: str) -> bool:
    """`name := name \\/ e`"""
    expr = action.expression
    return (
        action.target == name
        and isinstance(expr, ast.BinaryExpr)
        and expr.op == ast.UNION
        and isinstance(expr.left, ast.Name)
        and expr.left.name == name
    )


def _shrinks(action: ast.Action, name: str) -> bool:
    """`name := name \\ e`"""
    expr = action.expression
    return (
        action.target == name
        and isinstance(expr, ast.BinaryExpr)
        and expr.op == ast.MINUS
        and isinstance(expr.left, ast.Name)
        and expr.left.name == name
    )


def inserts_into(event: ResolvedEvent, class_name: str) -> bool:
    return any(_grows(a, class_name) for a in event.actions)


def removes_from_live(machine: ResolvedMachine, event: ResolvedEvent, historical: str) -> Optional[str]:
    for live in live_classes(machine, historical):
        if any(_shrinks(a, live) for a in event.actions):
            return live
    return None


def is_move(machine: ResolvedMachine, event: ResolvedEvent, historical: str) -> bool:
    """Event removes from a live class and inserts into the historical class at once"""
    return inserts_into(event, historical) and removes_from_live(machine, event, historical) is not None


def own_vocabulary(machine: ResolvedMachine, class_name: str) -> List[str]:
    """The class itself plus attributes and associations whose source is the class"""
    names = [class_name]
    for decl in machine.relations:
        if decl.typing.source == class_name:
            names.append(decl.name)
    return names


def _historical_attributes(machine: ResolvedMachine, historical: str) -> List[str]:
    return [
        d.name
        for d in machine.relations
        if d.typing.source == historical and d.typing.kind.is_total
    ]


def check_historical_pattern(chain) -> List[LintFinding]:
    """
    Verify the archive pattern for every historical class of the chain.

    Findings:
        non-atomic-move: an event inserts into a historical class without
            removing from a live class of the same carrier set
        historical-attribute: a move event leaves a total attribute of the
            historical class unassigned
        no-historical: the chain declares no historical class (info)
    """
    resolved = resolve(chain)
    findings: List[LintFinding] = []
    any_historical = False
    for machine in resolved.machines:
        for historical in historical_classes(machine):
            any_historical = True
            findings.extend(_check_class(machine, historical))
    if not any_historical:
        findings.append(
            LintFinding(
                rule="no-historical",
                severity=INFO,
                subject="chain",
                message="no class is annotated historical",
            )
        )
    return dedupe(findings)


def _check_class(machine: ResolvedMachine, historical: str) -> Sequence[LintFinding]:
    findings = []
    attributes = _historical_attributes(machine, historical)
    for event in machine.events:
        if not inserts_into(event, historical):
            continue
        if removes_from_live(machine, event, historical) is None:
            live = ", ".join(live_classes(machine, historical)) or "none"
            findings.append(
                LintFinding(
                    rule="non-atomic-move",
                    severity=ERROR,
                    subject=event.name,
                    message=f"inserts into {historical} without removing from a live class ({live})",
                    machine=machine.name,
                )
            )
            continue
        missing = [a for a in attributes if a not in event.targets]
        for attribute in missing:
            findings.append(
                LintFinding(
                    rule="historical-attribute",
                    severity=WARNING,
                    subject=f"{event.name}.{attribute}",
                    message=f"moves into {historical} but does not assign {attribute}",
                    machine=machine.name,
                )
            )
    return findings
