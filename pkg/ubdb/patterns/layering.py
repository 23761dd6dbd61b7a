"""
Layered-refinement lint

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import List

from ubdb.model.ast import LAYER_LABELS, ROLE_ATTRIBUTE
from ubdb.model.chain import ORIGIN_NEW, ResolvedMachine
from ubdb.model.resolve import resolve
from ubdb.patterns.findings import INFO, WARNING, LintFinding
from ubdb.utils.logger import get_logger

logger = get_logger()

# Labels that may appear anywhere in the chain
_UNORDERED = ("attribute-classes", "other")


def _order(label: str) -> int:
    return LAYER_LABELS.index(label)


def _new_classes(machine: ResolvedMachine, kind: str) -> List[str]:
    inherited = set(machine.abstract_variables)
    result = []
    for name in machine.class_names:
        annotation = machine.annotation(name)
        if name not in inherited and annotation is not None and annotation.kind == kind:
            result.append(name)
    return result


def _new_attributes(machine: ResolvedMachine) -> List[str]:
    inherited = set(machine.abstract_variables)
    return [d.name for d in machine.variables if d.role == ROLE_ATTRIBUTE and d.name not in inherited]


def _new_queries(machine: ResolvedMachine) -> List[str]:
    return [e.name for e in machine.events if e.origin == ORIGIN_NEW and e.kind == "query"]


def infer_layer(machine: ResolvedMachine) -> str:
    """Best guess at a layer label from what the machine introduces"""
    introduces_state = bool(set(machine.variable_names) - set(machine.abstract_variables))
    if _new_queries(machine) and not introduces_state:
        return "queries"
    if _new_classes(machine, "historical"):
        return "historical"
    if _new_classes(machine, "secondary"):
        return "secondary"
    if _new_classes(machine, "attribute"):
        return "attribute-classes"
    if machine.abstract is None:
        return "structure"
    if _new_attributes(machine):
        return "attributes"
    return "other"


def lint_layering(chain) -> List[LintFinding]:
    """
    Warn about concepts introduced earlier than their layer and about layers
    out of order; report the detected layer sequence as info.
    """
    resolved = resolve(chain)
    findings: List[LintFinding] = []
    labels = []
    highest = -1
    for machine in resolved.machines:
        label = machine.layer
        if label is None:
            label = infer_layer(machine)
            findings.append(
                LintFinding(
                    rule="layer-inferred",
                    severity=INFO,
                    subject=machine.name,
                    message=f"no layer label; looks like '{label}'",
                    machine=machine.name,
                )
            )
        labels.append(label)
        findings.extend(_concepts_in_layer(machine, label))
        if label in _UNORDERED:
            continue
        if _order(label) < highest:
            findings.append(
                LintFinding(
                    rule="layer-order",
                    severity=WARNING,
                    subject=machine.name,
                    message=f"layer '{label}' comes after '{LAYER_LABELS[highest]}'",
                    machine=machine.name,
                )
            )
        highest = max(highest, _order(label))
    if labels:
        findings.append(
            LintFinding(
                rule="layer-sequence",
                severity=INFO,
                subject="chain",
                message=" -> ".join(labels),
            )
        )
    logger.debug(f"lint_layering: {len(findings)} finding(s)")
    return findings


def _concepts_in_layer(machine: ResolvedMachine, label: str) -> List[LintFinding]:
    findings = []
    if label == "other":
        return findings
    position = _order(label)

    def warn(rule: str, subject: str, message: str) -> None:
        findings.append(LintFinding(rule=rule, severity=WARNING, subject=subject, message=message, machine=machine.name))

    if position < _order("secondary"):
        for name in _new_classes(machine, "secondary"):
            warn("secondary-layer", name, f"secondary class introduced in the '{label}' layer")
    if position < _order("historical") and label != "attribute-classes":
        for name in _new_classes(machine, "historical"):
            warn("historical-layer", name, f"historical class introduced in the '{label}' layer")
    if position < _order("queries"):
        for name in _new_queries(machine):
            warn("query-layer", name, f"query event introduced in the '{label}' layer")
    if label == "structure":
        attributes = _new_attributes(machine)
        if attributes:
            findings.append(
                LintFinding(
                    rule="attribute-order",
                    severity=INFO,
                    subject=machine.name,
                    message=f"attributes {', '.join(attributes)} introduced with the class structure; "
                    "a separate attributes refinement is preferred",
                    machine=machine.name,
                )
            )
    return findings
