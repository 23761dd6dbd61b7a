"""
Typechecking of resolved chains

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

from ubdb.model import ast
from ubdb.model.ast import (
    ClassTyping,
    RelationTyping,
    conjuncts,
    free_names,
)
from ubdb.model.chain import ORIGIN_REFINES, ResolvedChain, ResolvedEvent, ResolvedMachine
from ubdb.model.types import (
    AnyType,
    AtomType,
    PairType,
    PowType,
    SetType,
    unify,
)

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class TypeDiagnostic:
    severity: str
    message: str
    machine: str
    event: Optional[str] = None
    label: Optional[str] = None
    span: Any = field(default=None, compare=False)

    def __str__(self) -> str:
        where = self.machine
        if self.event:
            where += f"/{self.event}"
        if self.label:
            where += f"/{self.label}"
        prefix = f"{self.span}: " if self.span is not None else ""
        return f"{prefix}{self.severity}: {where}: {self.message}"


class _Reporter:
    def __init__(self, machine: str):
        self.machine = machine
        self.event: Optional[str] = None
        self.label: Optional[str] = None
        self.diagnostics: List[TypeDiagnostic] = []

    def error(self, message: str, span=None, severity: str = ERROR) -> None:
        self.diagnostics.append(
            TypeDiagnostic(severity, message, self.machine, self.event, self.label, span)
        )


def machine_environment(machine: ResolvedMachine) -> Dict[str, SetType]:
    """Types of every global name visible in a machine"""
    env: Dict[str, SetType] = {}
    for carrier in machine.carriers:
        env[carrier] = PowType(AtomType(carrier))
    for decl in machine.variables:
        if isinstance(decl.typing, ClassTyping):
            env[decl.name] = PowType(AtomType(decl.typing.carrier))
    for decl in machine.variables:
        if isinstance(decl.typing, RelationTyping):
            source = machine.carrier_of(decl.typing.source)
            target = machine.carrier_of(decl.typing.target)
            if source and target:
                env[decl.name] = PowType(PairType(AtomType(source), AtomType(target)))
    for constant in machine.constants:
        reporter = _Reporter(machine.name)
        inferred = infer_type(constant.value, env, reporter)
        if inferred is not None:
            env[constant.name] = inferred
    return env


def infer_type(expr: ast.Expression, env: Dict[str, SetType], reporter=None) -> Optional[SetType]:
    """Type of an expression, reporting mismatches to reporter when given"""
    reporter = reporter or _Reporter("?")

    def fail(message: str) -> None:
        reporter.error(message, getattr(expr, "span", None))

    if isinstance(expr, ast.Name):
        if expr.name not in env:
            fail(f"'{expr.name}' has no type")
            return None
        return env[expr.name]
    if isinstance(expr, ast.AtomLit):
        if expr.index < 1:
            fail(f"atom index must be >= 1 in {expr.carrier}.{expr.index}")
        if PowType(AtomType(expr.carrier)) != env.get(expr.carrier):
            fail(f"'{expr.carrier}' is not a carrier set")
            return None
        return AtomType(expr.carrier)
    if isinstance(expr, ast.SetExt):
        element: Optional[SetType] = AnyType()
        for item in expr.elements:
            item_type = infer_type(item, env, reporter)
            merged = unify(element, item_type)
            if merged is None:
                if item_type is not None and element is not None:
                    fail(f"set elements of different types: {element} and {item_type}")
                return None
            element = merged
        return PowType(element)
    if isinstance(expr, ast.Maplet):
        left = infer_type(expr.left, env, reporter)
        right = infer_type(expr.right, env, reporter)
        if left is None or right is None:
            return None
        return PairType(left, right)
    if isinstance(expr, ast.UnaryExpr):
        operand = infer_type(expr.operand, env, reporter)
        if operand is None:
            return None
        if expr.op == ast.POW:
            if not isinstance(operand, PowType):
                fail(f"POW of a non-set ({operand})")
                return None
            return PowType(operand)
        pair = _relation_parts(operand)
        if pair is None:
            fail(f"'{expr.op}' needs a relation, got {operand}")
            return None
        left, right = pair
        if expr.op == ast.DOM:
            return PowType(left)
        if expr.op == ast.RAN:
            return PowType(right)
        return PowType(PairType(right, left))
    if isinstance(expr, ast.BinaryExpr):
        left = infer_type(expr.left, env, reporter)
        right = infer_type(expr.right, env, reporter)
        if left is None or right is None:
            return None
        return _binary_type(expr.op, left, right, fail)
    if isinstance(expr, ast.Image):
        relation = infer_type(expr.relation, env, reporter)
        argument = infer_type(expr.argument, env, reporter)
        if relation is None or argument is None:
            return None
        parts = _relation_parts(relation)
        if parts is None or unify(PowType(parts[0]), argument) is None:
            fail(f"image of {argument} through {relation}")
            return None
        return PowType(parts[1])
    if isinstance(expr, ast.Apply):
        function = infer_type(expr.function, env, reporter)
        argument = infer_type(expr.argument, env, reporter)
        if function is None or argument is None:
            return None
        parts = _relation_parts(function)
        if parts is None or unify(parts[0], argument) is None:
            fail(f"application of {function} to {argument}")
            return None
        return parts[1]
    fail(f"not an expression: {type(expr).__name__}")
    return None


def _relation_parts(t: SetType):
    if isinstance(t, PowType):
        if isinstance(t.element, PairType):
            return t.element.left, t.element.right
        if isinstance(t.element, AnyType):
            return AnyType(), AnyType()
    return None


def _binary_type(op: str, left: SetType, right: SetType, fail) -> Optional[SetType]:
    if op in (ast.UNION, ast.MINUS, ast.INTER):
        merged = unify(left, right)
        if merged is None or not isinstance(merged, PowType):
            fail(f"'{op}' of {left} and {right}")
            return None
        return merged
    if op == ast.PRODUCT:
        if not (isinstance(left, PowType) and isinstance(right, PowType)):
            fail(f"'**' of {left} and {right}")
            return None
        return PowType(PairType(left.element, right.element))
    if op in (ast.DOMSUB, ast.DOMRES):
        parts = _relation_parts(right)
        if parts is None or not isinstance(left, PowType) or unify(left.element, parts[0]) is None:
            fail(f"'{op}' of {left} and {right}")
            return None
        return right
    if op == ast.OVERRIDE:
        merged = unify(left, right)
        if merged is None or _relation_parts(merged) is None:
            fail(f"'<+' of {left} and {right}")
            return None
        return merged
    if op == ast.COMPOSE:
        first = _relation_parts(left)
        second = _relation_parts(right)
        if first is None or second is None or unify(first[1], second[0]) is None:
            fail(f"';' of {left} and {right}")
            return None
        return PowType(PairType(first[0], second[1]))
    fail(f"unknown operator '{op}'")
    return None


def check_predicate(pred: ast.Predicate, env: Dict[str, SetType], reporter) -> None:
    def fail(message: str) -> None:
        reporter.error(message, getattr(pred, "span", None))

    if isinstance(pred, ast.Truth):
        return
    if isinstance(pred, ast.Not):
        check_predicate(pred.operand, env, reporter)
        return
    if isinstance(pred, ast.BinaryPred):
        check_predicate(pred.left, env, reporter)
        check_predicate(pred.right, env, reporter)
        return
    if isinstance(pred, ast.Quantifier):
        inner = dict(env)
        for binder in pred.binders:
            typing = infer_type(binder.typing, inner, reporter)
            if isinstance(typing, PowType):
                inner[binder.name] = typing.element
            elif typing is not None:
                fail(f"bound variable '{binder.name}' is typed by a non-set ({typing})")
                return
            else:
                return
        check_predicate(pred.body, inner, reporter)
        return
    if isinstance(pred, ast.Relational):
        left = infer_type(pred.left, env, reporter)
        right = infer_type(pred.right, env, reporter)
        if left is None or right is None:
            return
        if pred.op in (ast.MEMBER, ast.NOT_MEMBER):
            if not isinstance(right, PowType) or unify(left, right.element) is None:
                fail(f"membership of {left} in {right}")
        elif pred.op == ast.SUBSET:
            if unify(left, right) is None or not isinstance(left, PowType):
                fail(f"subset of {left} and {right}")
        elif unify(left, right) is None:
            fail(f"comparison of {left} and {right}")
        return
    if isinstance(pred, ast.FunctionClass):
        element = infer_type(pred.element, env, reporter)
        source = infer_type(pred.source, env, reporter)
        target = infer_type(pred.target, env, reporter)
        if element is None or source is None or target is None:
            return
        if not (isinstance(source, PowType) and isinstance(target, PowType)):
            fail(f"function class between non-sets {source} and {target}")
            return
        if unify(element, PowType(PairType(source.element, target.element))) is None:
            fail(f"{element} is not a relation from {source} to {target}")
        return
    fail(f"not a predicate: {type(pred).__name__}")


def typecheck(chain: ResolvedChain) -> List[TypeDiagnostic]:
    """
    Assign a type to every expression of a resolved chain.

    Returns:
        Diagnostics; an empty list means the chain is well-typed. Errors make
        the chain unusable, warnings flag methodology issues only.
    """
    diagnostics: List[TypeDiagnostic] = []
    for machine in chain.machines:
        diagnostics.extend(_check_machine(chain, machine))
    return diagnostics


def has_errors(diagnostics: List[TypeDiagnostic]) -> bool:
    return any(d.severity == ERROR for d in diagnostics)


def _check_machine(chain: ResolvedChain, machine: ResolvedMachine) -> List[TypeDiagnostic]:
    reporter = _Reporter(machine.name)
    env = machine_environment(machine)
    source = machine.source

    for constant in machine.constants:
        reporter.label = constant.name
        if not isinstance(constant.value, (ast.AtomLit, ast.SetExt)) or any(
            not isinstance(e, ast.AtomLit) for e in getattr(constant.value, "elements", ())
        ):
            reporter.error(
                "constants must be atom literals or enumerated sets of atoms", constant.span
            )
    reporter.label = None

    own = {d.name for d in source.variables} if source is not None else set()
    for decl in machine.variables:
        if decl.name not in own:
            continue
        typing = decl.typing
        if isinstance(typing, RelationTyping):
            src_decl = machine.variable(typing.source)
            if src_decl is None or not src_decl.is_class:
                reporter.error(f"'{decl.name}' must start from a class, not '{typing.source}'", decl.span)
            target_decl = machine.variable(typing.target)
            if decl.role == ast.ROLE_ASSOCIATION and (target_decl is None or not target_decl.is_class):
                reporter.error(
                    f"association '{decl.name}' must target a class, not '{typing.target}'",
                    decl.span,
                )
            if decl.role == ast.ROLE_ATTRIBUTE and typing.target not in machine.carriers:
                reporter.error(
                    f"attribute '{decl.name}' must target a carrier set, not '{typing.target}'",
                    decl.span,
                )
            if typing.kind.injective and not typing.kind.is_function:
                reporter.error(f"'{decl.name}' is injective but not a function", decl.span)

    for annotation in machine.annotations:
        if annotation.kind not in ast.CLASS_KINDS:
            reporter.error(f"unknown class kind '{annotation.kind}'", annotation.span)
        if annotation.supertype is not None:
            if machine.carrier_of(annotation.class_name) != machine.carrier_of(annotation.supertype):
                reporter.error(
                    f"class '{annotation.class_name}' and its supertype "
                    f"'{annotation.supertype}' use different carrier sets",
                    annotation.span,
                )
    for decl in machine.variables:
        if decl.is_class and machine.annotation(decl.name) is None:
            reporter.error(f"class '{decl.name}' has no kind annotation", decl.span)

    for invariant in machine.invariants:
        reporter.label = invariant.label
        check_predicate(invariant.predicate, env, reporter)
    if machine.abstract is not None:
        abstract = chain.machine(machine.abstract)
        glue_env = dict(machine_environment(abstract))
        glue_env.update(env)
        for invariant in machine.gluing:
            reporter.label = invariant.label
            check_predicate(invariant.predicate, glue_env, reporter)
    reporter.label = None

    for axiom in machine.axioms:
        reporter.label = axiom.label
        check_predicate(axiom.predicate, env, reporter)
    reporter.label = None

    for event in machine.events:
        _check_event(chain, machine, event, env, reporter)
    return reporter.diagnostics


def _check_event(
    chain: ResolvedChain,
    machine: ResolvedMachine,
    event: ResolvedEvent,
    env: Dict[str, SetType],
    reporter: _Reporter,
) -> None:
    reporter.event = event.name
    reporter.label = None
    local = dict(env)
    param_names = set(event.parameter_names)

    if event.kind not in ast.EVENT_KINDS:
        reporter.error(f"unknown event kind '{event.kind}'")
    for parameter in event.parameters:
        if free_names(parameter.typing) & param_names:
            reporter.error(
                f"typing of parameter '{parameter.name}' refers to another parameter",
                parameter.span,
            )
        typing = infer_type(parameter.typing, env, reporter)
        if isinstance(typing, PowType):
            local[parameter.name] = typing.element
        elif typing is not None:
            reporter.error(f"parameter '{parameter.name}' is typed by a non-set", parameter.span)

    seen_labels = set()
    for guard in event.guards:
        reporter.label = guard.label
        if guard.label in seen_labels:
            reporter.error(f"guard label '{guard.label}' is used twice", guard.span)
        seen_labels.add(guard.label)
        check_predicate(guard.predicate, local, reporter)

    removed = set(machine.removed)
    targets = set()
    seen_labels = set()
    for action in event.actions:
        reporter.label = action.label
        if action.label in seen_labels:
            reporter.error(f"action label '{action.label}' is used twice", action.span)
        seen_labels.add(action.label)
        if action.target in targets:
            reporter.error(f"'{action.target}' is assigned twice", action.span)
        targets.add(action.target)
        if action.target in removed:
            reporter.error(f"'{action.target}' was removed by this refinement", action.span)
            continue
        if machine.variable(action.target) is None:
            reporter.error(f"'{action.target}' is not a variable", action.span)
            continue
        value = infer_type(action.expression, local, reporter)
        expected = env.get(action.target)
        if value is not None and expected is not None and unify(value, expected) is None:
            reporter.error(f"assigns {value} to '{action.target}' of type {expected}", action.span)
    reporter.label = None

    stale = event.reads() & removed
    if stale:
        reporter.error(f"reads removed variable(s) {', '.join(sorted(stale))}; refine the event")

    if event.kind == "query" and event.actions:
        reporter.error("query events have no actions")
    if event.class_owner is not None:
        owner = machine.variable(event.class_owner)
        if owner is None or not owner.is_class:
            reporter.error(f"owner '{event.class_owner}' is not a class")
    if event.kind == "constructor":
        _check_constructor(machine, event, reporter)
    if event.origin == ORIGIN_REFINES and machine.abstract is not None:
        base = chain.machine(machine.abstract).event(event.abstract)
        if base is not None:
            missing = [p for p in base.parameter_names if p not in param_names]
            if missing:
                reporter.error(
                    f"refined event drops abstract parameter(s) {', '.join(missing)}",
                    severity=WARNING,
                )
    reporter.event = None


def fresh_parameter(machine: ResolvedMachine, event: ResolvedEvent) -> Optional[str]:
    """Parameter guarded by 'p /: C' with C the owner or one of its supertypes"""
    if event.class_owner is None:
        return None
    owners = (event.class_owner,) + machine.supertypes(event.class_owner)
    params = set(event.parameter_names)
    for guard in event.guards:
        for part in conjuncts(guard.predicate):
            if (
                isinstance(part, ast.Relational)
                and part.op == ast.NOT_MEMBER
                and isinstance(part.left, ast.Name)
                and part.left.name in params
                and isinstance(part.right, ast.Name)
                and part.right.name in owners
            ):
                return part.left.name
    return None


def _check_constructor(machine: ResolvedMachine, event: ResolvedEvent, reporter: _Reporter) -> None:
    if event.class_owner is None:
        reporter.error("constructor has no owner class ('of CLASS')", severity=WARNING)
        return
    if fresh_parameter(machine, event) is None:
        reporter.error(
            f"constructor has no fresh parameter guarded by '/: {event.class_owner}'",
            severity=WARNING,
        )
