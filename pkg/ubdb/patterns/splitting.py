"""
Association splitting

Refines a many-to-many relation R : A <-> B into a new class C with two total
functions R1 : C --> A and R2 : C --> B, glued by R = R1~ ; R2 and the
composite uniqueness of (R1, R2). Every event that reads or writes R is
rewritten against the new vocabulary.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from ubdb.checker.explorer import reachable_states
from ubdb.engine.evaluator import Evaluator
from ubdb.engine.values import Scope, State
from ubdb.exceptions import NameClashError, NotARelationError, PatternError, UnsupportedRewriteError
from ubdb.model import ast
from ubdb.model.ast import (
    Action,
    Binder,
    BinaryExpr,
    BinaryPred,
    ClassAnnotation,
    ClassTyping,
    Context,
    Event,
    Guard,
    Invariant,
    Machine,
    Maplet,
    Name,
    Not,
    Parameter,
    Quantifier,
    RefinementChain,
    Relational,
    RelationTyping,
    SetExt,
    UnaryExpr,
    VariableDecl,
    free_names,
    substitute,
)
from ubdb.model.chain import ResolvedChain, ResolvedEvent, ResolvedMachine
from ubdb.model.resolve import resolve
from ubdb.utils.logger import get_logger

logger = get_logger()


@dataclass(frozen=True)
class SplitSpec:
    """Which relation to split and the names of the new class and functions"""

    relation: str
    new_class: str
    fn1_name: str
    fn2_name: str
    machine_name: Optional[str] = None
    carrier: Optional[str] = None

    def names(self, last: str) -> Tuple[str, str, str]:
        """(machine, context, carrier set) names of the appended components"""
        machine = self.machine_name or f"{last}_{self.relation}_split"
        carrier = self.carrier or f"{self.new_class.upper()}_SET"
        return machine, f"{machine}_ctx", carrier


def _taken_names(chain: RefinementChain, resolved: ResolvedChain) -> Set[str]:
    taken: Set[str] = set()
    for context in chain.contexts:
        taken.add(context.name)
        taken.update(context.carrier_sets)
        taken.update(c.name for c in context.constants)
    for machine in resolved.machines:
        taken.add(machine.name)
        taken.update(machine.variable_names)
        taken.update(machine.removed)
    return taken


def _fresh(base: str, used: Set[str]) -> str:
    name = base
    counter = 1
    while name in used:
        name = f"{base}_{counter}"
        counter += 1
    used.add(name)
    return name


class _Rewriter:
    """Rewrites one event's guards and actions from R to C, R1 and R2"""

    def __init__(self, spec: SplitSpec, carrier: str, machine: ResolvedMachine):
        self.spec = spec
        self.carrier = carrier
        self.machine = machine
        self.relation = spec.relation
        self.composed = BinaryExpr(ast.COMPOSE, UnaryExpr(ast.INVERSE, Name(spec.fn1_name)), Name(spec.fn2_name))
        self.avoid: Set[str] = set(machine.variable_names)

    # expressions and predicates

    def expression(self, expr):
        return substitute(expr, {self.relation: self.composed})

    def _witness(self, left, right, avoid: Set[str]) -> Quantifier:
        """#c : C . c |-> left : R1 & c |-> right : R2"""
        name = _fresh("c", set(avoid))
        c = Name(name)
        body = BinaryPred(
            ast.AND,
            Relational(ast.MEMBER, Maplet(c, left), Name(self.spec.fn1_name)),
            Relational(ast.MEMBER, Maplet(c, right), Name(self.spec.fn2_name)),
        )
        return Quantifier(ast.EXISTS, (Binder(name, Name(self.spec.new_class)),), body)

    def predicate(self, pred):
        if isinstance(pred, Relational) and pred.op in (ast.MEMBER, ast.NOT_MEMBER):
            if isinstance(pred.right, Name) and pred.right.name == self.relation and isinstance(pred.left, Maplet):
                left = self.expression(pred.left.left)
                right = self.expression(pred.left.right)
                avoid = set(free_names(left) | free_names(right)) | self.avoid
                witness = self._witness(left, right, avoid)
                return witness if pred.op == ast.MEMBER else Not(witness)
        if isinstance(pred, Not):
            return Not(self.predicate(pred.operand))
        if isinstance(pred, BinaryPred):
            return BinaryPred(pred.op, self.predicate(pred.left), self.predicate(pred.right))
        if isinstance(pred, Quantifier):
            if any(b.name == self.relation for b in pred.binders):
                return pred
            binders = tuple(Binder(b.name, self.expression(b.typing)) for b in pred.binders)
            return Quantifier(pred.kind, binders, self.predicate(pred.body))
        return substitute(pred, {self.relation: self.composed})

    # actions

    def _single_pair(self, expr) -> Optional[Tuple[object, object]]:
        if isinstance(expr, SetExt) and len(expr.elements) == 1 and isinstance(expr.elements[0], Maplet):
            pair = expr.elements[0]
            return self.expression(pair.left), self.expression(pair.right)
        return None

    def _is_relation(self, expr) -> bool:
        return isinstance(expr, Name) and expr.name == self.relation

    def relation_update(self, event: ResolvedEvent, expr):
        """
        Classify the right-hand side of `R := expr`.

        Returns:
            (removed C instances or None, inserted (a, b) pair or None, clear all)
        """
        r1_inv = UnaryExpr(ast.INVERSE, Name(self.spec.fn1_name))
        r2_inv = UnaryExpr(ast.INVERSE, Name(self.spec.fn2_name))
        if self._is_relation(expr):
            return None, None, False
        if isinstance(expr, SetExt) and not expr.elements:
            return None, None, True
        if isinstance(expr, BinaryExpr):
            if expr.op == ast.UNION:
                for this, other in ((expr.left, expr.right), (expr.right, expr.left)):
                    pair = self._single_pair(other)
                    if self._is_relation(this) and pair is not None:
                        return None, pair, False
            if expr.op == ast.DOMSUB and self._is_relation(expr.right):
                return ast.Image(r1_inv, self.expression(expr.left)), None, False
            if expr.op == ast.MINUS and self._is_relation(expr.left):
                pair = self._single_pair(expr.right)
                if pair is not None:
                    removed = BinaryExpr(
                        ast.INTER,
                        ast.Image(r1_inv, SetExt((pair[0],))),
                        ast.Image(r2_inv, SetExt((pair[1],))),
                    )
                    return removed, None, False
            if expr.op == ast.OVERRIDE and self._is_relation(expr.left):
                pair = self._single_pair(expr.right)
                if pair is not None:
                    return ast.Image(r1_inv, SetExt((pair[0],))), pair, False
        raise UnsupportedRewriteError(
            f"Event '{event.name}' updates {self.relation} in a way association splitting cannot rewrite",
            event=event.name,
        )

    def event(self, event: ResolvedEvent) -> Event:
        spec = self.spec
        names = set(event.parameter_names) | set(self.machine.variable_names)
        names |= {spec.new_class, spec.fn1_name, spec.fn2_name}
        self.avoid = set(names)
        params = list(event.parameters)
        guards = [Guard(g.label, self.predicate(g.predicate)) for g in event.guards]
        actions: List[Action] = []
        labels = {g.label for g in event.guards} | {a.label for a in event.actions}
        for action in event.actions:
            if action.target != self.relation:
                actions.append(Action(action.label, action.target, self.expression(action.expression)))
                continue
            removed, pair, clear = self.relation_update(event, action.expression)
            if removed is None and pair is None and not clear:
                continue
            c_expr: object = Name(spec.new_class)
            r1_expr: object = Name(spec.fn1_name)
            r2_expr: object = Name(spec.fn2_name)
            if clear:
                c_expr = r1_expr = r2_expr = SetExt(())
            if removed is not None:
                c_expr = BinaryExpr(ast.MINUS, c_expr, removed)
                r1_expr = BinaryExpr(ast.DOMSUB, removed, r1_expr)
                r2_expr = BinaryExpr(ast.DOMSUB, removed, r2_expr)
            if pair is not None:
                fresh = _fresh(f"this_{spec.new_class}", names)
                params.append(Parameter(fresh, Name(self.carrier)))
                guards.append(
                    Guard(_fresh(f"grd_{spec.new_class}", labels), Relational(ast.NOT_MEMBER, Name(fresh), Name(spec.new_class)))
                )
                if removed is None:
                    avoid = set(free_names(pair[0]) | free_names(pair[1])) | self.avoid
                    unique = Not(self._witness(pair[0], pair[1], avoid))
                    if all(g.predicate != unique for g in guards):
                        guards.append(Guard(_fresh(f"grd_{spec.new_class}_pair", labels), unique))
                c_expr = BinaryExpr(ast.UNION, c_expr, SetExt((Name(fresh),)))
                r1_expr = BinaryExpr(ast.UNION, r1_expr, SetExt((Maplet(Name(fresh), pair[0]),)))
                r2_expr = BinaryExpr(ast.UNION, r2_expr, SetExt((Maplet(Name(fresh), pair[1]),)))
            actions.append(Action(action.label, spec.new_class, c_expr))
            actions.append(Action(_fresh(f"{action.label}_{spec.fn1_name}", labels), spec.fn1_name, r1_expr))
            actions.append(Action(_fresh(f"{action.label}_{spec.fn2_name}", labels), spec.fn2_name, r2_expr))
        return Event(
            name=event.name,
            kind=event.kind,
            class_owner=event.class_owner,
            parameters=tuple(params),
            guards=tuple(guards),
            actions=tuple(actions),
            refines=event.name,
        )


def _touches(event: ResolvedEvent, relation: str) -> bool:
    return relation in event.reads() or relation in event.targets


def _invariant_labels(machine: ResolvedMachine) -> Tuple[str, str]:
    used = {inv.label for inv in machine.invariants + machine.gluing}
    first, second = "inv1", "inv2"
    if first in used or second in used:
        return _fresh(f"{first}_split", used), _fresh(f"{second}_split", used)
    return first, second


def split_association(chain, spec: SplitSpec) -> RefinementChain:
    """
    Append a machine refining the last one in which spec.relation is replaced
    by a class and two total functions.

    Raises:
        NotARelationError: the relation is missing or is not many-to-many
        NameClashError: a new name is already used in the chain
        UnsupportedRewriteError: an event updates the relation in an unsupported shape
    """
    base = chain.chain if isinstance(chain, ResolvedChain) else chain
    resolved = resolve(base)
    last = resolved.last
    if last is None:
        raise PatternError("The chain has no machine to refine", error_code="NO_MACHINE")
    decl = last.variable(spec.relation)
    if decl is None or not isinstance(decl.typing, RelationTyping):
        raise NotARelationError(f"'{spec.relation}' is not a relation of {last.name}", relation=spec.relation)
    if decl.typing.kind.kind != "relation":
        raise NotARelationError(
            f"'{spec.relation}' is a {decl.typing.kind.kind}, not a many-to-many relation",
            relation=spec.relation,
        )

    machine_name, context_name, carrier = spec.names(last.name)
    taken = _taken_names(base, resolved)
    new_names = [spec.new_class, spec.fn1_name, spec.fn2_name, carrier, machine_name, context_name]
    for index, name in enumerate(new_names):
        if name in taken or name in new_names[:index]:
            raise NameClashError(f"'{name}' is already used in the chain", name=name)

    source, target = decl.typing.source, decl.typing.target
    variables = (
        VariableDecl(spec.new_class, ast.ROLE_CLASS, ClassTyping(carrier)),
        VariableDecl(spec.fn1_name, ast.ROLE_ASSOCIATION, RelationTyping(spec.new_class, source, ast.TOTAL_FUNCTION)),
        VariableDecl(spec.fn2_name, decl.role, RelationTyping(spec.new_class, target, ast.TOTAL_FUNCTION)),
    )
    rewriter = _Rewriter(spec, carrier, last)
    glue_label, unique_label = _invariant_labels(last)
    invariants = (
        Invariant(glue_label, Relational(ast.EQUAL, Name(spec.relation), rewriter.composed)),
        Invariant(unique_label, _composite_uniqueness(spec, set(last.variable_names))),
    )
    events = tuple(rewriter.event(e) for e in last.events if _touches(e, spec.relation))

    context = Context(context_name, carrier_sets=(carrier,))
    machine = Machine(
        name=machine_name,
        refines=last.name,
        sees=(context_name,),
        variables=variables,
        invariants=invariants,
        events=events,
        annotations=(ClassAnnotation(spec.new_class, "secondary"),),
        removed=(spec.relation,),
    )
    logger.info(
        f"Split {spec.relation} of {last.name} into {spec.new_class}, {spec.fn1_name}, {spec.fn2_name}; "
        f"{len(events)} event(s) rewritten"
    )
    return RefinementChain(base.contexts + (context,), base.machines + (machine,))


def _composite_uniqueness(spec: SplitSpec, avoid: Set[str]) -> Quantifier:
    """!a : ran(R1), b : ran(R2), c1 : C, c2 : C . (c1|->a : R1 & c2|->a : R1 & c1|->b : R2 & c2|->b : R2) => c1 = c2"""
    used = set(avoid) | {spec.new_class, spec.fn1_name, spec.fn2_name}
    a, b, c1, c2 = (_fresh(n, used) for n in ("a", "b", "c1", "c2"))
    r1, r2 = Name(spec.fn1_name), Name(spec.fn2_name)
    parts = [
        Relational(ast.MEMBER, Maplet(Name(c1), Name(a)), r1),
        Relational(ast.MEMBER, Maplet(Name(c2), Name(a)), r1),
        Relational(ast.MEMBER, Maplet(Name(c1), Name(b)), r2),
        Relational(ast.MEMBER, Maplet(Name(c2), Name(b)), r2),
    ]
    body = BinaryPred(ast.IMPLIES, ast.conjunction(parts), Relational(ast.EQUAL, Name(c1), Name(c2)))
    binders = (
        Binder(a, UnaryExpr(ast.RAN, r1)),
        Binder(b, UnaryExpr(ast.RAN, r2)),
        Binder(c1, Name(spec.new_class)),
        Binder(c2, Name(spec.new_class)),
    )
    return Quantifier(ast.FORALL, binders, body)


def abstraction_image(transformed, relation: str, scope: Scope, budget: Optional[int] = None) -> FrozenSet[State]:
    """
    Reachable states of the split machine mapped to the abstract vocabulary.

    Each removed variable v is reconstructed from the gluing invariant `v = e`
    of the split machine; kept variables carry over unchanged.

    The image equals the abstract reachable set only when the link-class
    carrier has at least |A| * |B| atoms for the two end carriers of the
    relation. With fewer, the split machine cannot hold every pair at once
    and the image is a strict subset.
    """
    resolved = resolve(transformed)
    split = next((m for m in reversed(resolved.machines) if relation in m.removed), None)
    if split is None:
        raise PatternError(f"No machine of the chain removes '{relation}'", error_code="NOT_SPLIT")
    abstract = resolved.machine(split.abstract)
    definitions: Dict[str, object] = {}
    for invariant in split.gluing:
        pred = invariant.predicate
        if isinstance(pred, Relational) and pred.op == ast.EQUAL and isinstance(pred.left, Name):
            if pred.left.name in split.removed:
                definitions.setdefault(pred.left.name, pred.right)
    missing = [v for v in split.removed if v not in definitions]
    if missing:
        raise PatternError(
            f"No gluing equation defines {', '.join(missing)} in {split.name}", error_code="NOT_SPLIT"
        )
    evaluator = Evaluator.for_machine(split, scope)
    image = set()
    for state in reachable_states(split, scope, budget):
        values = []
        for name in abstract.variable_names:
            if name in definitions:
                values.append(evaluator.evaluate(definitions[name], state))
            else:
                values.append(state[name])
        image.add(State(abstract.variable_names, tuple(values)))
    return frozenset(image)
