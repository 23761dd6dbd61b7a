"""
Expression / predicate AST and the component declarations of a refinement chain

All nodes are frozen dataclasses built from tuples, so parsed models are
hashable and can be shared between threads. Source spans are excluded from
equality: two chains are structurally identical when they differ only in
where they were read from.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterator, Optional, Tuple, Union

if TYPE_CHECKING:
    from ubdb.parser.diagnostics import SourceSpan


def _span():
    return field(default=None, compare=False, repr=False)


# --- expressions ----------------------------------------------------------

UNION = "\\/"
MINUS = "\\"
INTER = "/\\"
PRODUCT = "**"
DOMSUB = "<-|"
DOMRES = "<|"
OVERRIDE = "<+"
COMPOSE = ";"

SET_OPERATORS = (UNION, MINUS, INTER, PRODUCT, DOMSUB, DOMRES, OVERRIDE, COMPOSE)

DOM = "dom"
RAN = "ran"
POW = "POW"
INVERSE = "~"

UNARY_OPERATORS = (DOM, RAN, POW, INVERSE)


@dataclass(frozen=True)
class Name:
    """Reference to a variable, constant, carrier set, parameter or bound variable"""

    name: str
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class AtomLit:
    """Literal carrier-set element, written SET.n"""

    carrier: str
    index: int
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class SetExt:
    """Enumerated set {e1, e2, ...}"""

    elements: Tuple["Expression", ...]
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Maplet:
    left: "Expression"
    right: "Expression"
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class BinaryExpr:
    op: str
    left: "Expression"
    right: "Expression"
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class UnaryExpr:
    op: str
    operand: "Expression"
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Image:
    """Relational image r[s]"""

    relation: "Expression"
    argument: "Expression"
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Apply:
    """Function application f(x)"""

    function: "Expression"
    argument: "Expression"
    span: Optional["SourceSpan"] = _span()


Expression = Union[Name, AtomLit, SetExt, Maplet, BinaryExpr, UnaryExpr, Image, Apply]


# --- predicates -----------------------------------------------------------

MEMBER = ":"
NOT_MEMBER = "/:"
SUBSET = "<:"
EQUAL = "="
NOT_EQUAL = "/="

RELATIONAL_OPERATORS = (MEMBER, NOT_MEMBER, SUBSET, EQUAL, NOT_EQUAL)

AND = "&"
OR = "or"
IMPLIES = "=>"
EQUIV = "<=>"

FORALL = "!"
EXISTS = "#"


@dataclass(frozen=True)
class RelationKind:
    """Shape of an association/attribute or of a function-class assertion"""

    kind: str  # relation | total-function | partial-function
    injective: bool = False

    @property
    def is_function(self) -> bool:
        return self.kind != "relation"

    @property
    def is_total(self) -> bool:
        return self.kind == "total-function"

    @property
    def arrow(self) -> str:
        return kind_to_arrow(self)


RELATION = RelationKind("relation")
TOTAL_FUNCTION = RelationKind("total-function")
PARTIAL_FUNCTION = RelationKind("partial-function")

ARROWS: Dict[str, RelationKind] = {
    "<->": RELATION,
    "-->": TOTAL_FUNCTION,
    "+->": PARTIAL_FUNCTION,
    ">->": RelationKind("total-function", True),
    ">+>": RelationKind("partial-function", True),
}


def kind_to_arrow(kind: RelationKind) -> str:
    for arrow, candidate in ARROWS.items():
        if candidate == kind:
            return arrow
    # injective relation is rejected by typecheck; print it as a relation
    return "<->"


@dataclass(frozen=True)
class Truth:
    value: bool
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Relational:
    """e : S, e /: S, A <: B, a = b, a /= b"""

    op: str
    left: Expression
    right: Expression
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class FunctionClass:
    """f : S --> T and the other arrows"""

    element: Expression
    source: Expression
    target: Expression
    kind: RelationKind
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Not:
    operand: "Predicate"
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class BinaryPred:
    op: str
    left: "Predicate"
    right: "Predicate"
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Binder:
    """Typed bound variable: name : typing"""

    name: str
    typing: Expression
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Quantifier:
    kind: str  # FORALL | EXISTS
    binders: Tuple[Binder, ...]
    body: "Predicate"
    span: Optional["SourceSpan"] = _span()


Predicate = Union[Truth, Relational, FunctionClass, Not, BinaryPred, Quantifier]
Node = Union[Expression, Predicate]


# --- declarations ---------------------------------------------------------

CLASS_KINDS = ("primary", "secondary", "attribute", "historical")
EVENT_KINDS = ("constructor", "destructor", "normal", "query")
LAYER_LABELS = (
    "structure",
    "attributes",
    "secondary",
    "attribute-classes",
    "historical",
    "queries",
    "other",
)

ROLE_CLASS = "class-instance-set"
ROLE_ATTRIBUTE = "attribute"
ROLE_ASSOCIATION = "association"


@dataclass(frozen=True)
class ClassTyping:
    """Class-instance-set typed as a subset of one carrier set"""

    carrier: str


@dataclass(frozen=True)
class RelationTyping:
    """Attribute/association typed as a relation from a class to a set or class"""

    source: str
    target: str
    kind: RelationKind


Typing = Union[ClassTyping, RelationTyping]


@dataclass(frozen=True)
class VariableDecl:
    name: str
    role: str
    typing: Typing
    span: Optional["SourceSpan"] = _span()

    @property
    def is_class(self) -> bool:
        return self.role == ROLE_CLASS


@dataclass(frozen=True)
class ClassAnnotation:
    class_name: str
    kind: str
    supertype: Optional[str] = None
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Constant:
    name: str
    value: Expression
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Axiom:
    label: str
    predicate: Predicate
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Invariant:
    label: str
    predicate: Predicate
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Parameter:
    name: str
    typing: Expression
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Guard:
    label: str
    predicate: Predicate
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Action:
    label: str
    target: str
    expression: Expression
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Event:
    name: str
    kind: str = "normal"
    extends: Optional[str] = None
    class_owner: Optional[str] = None
    parameters: Tuple[Parameter, ...] = ()
    guards: Tuple[Guard, ...] = ()
    actions: Tuple[Action, ...] = ()
    refines: Optional[str] = None
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Context:
    name: str
    extends: Optional[str] = None
    carrier_sets: Tuple[str, ...] = ()
    constants: Tuple[Constant, ...] = ()
    axioms: Tuple[Axiom, ...] = ()
    span: Optional["SourceSpan"] = _span()


@dataclass(frozen=True)
class Machine:
    name: str
    refines: Optional[str] = None
    sees: Tuple[str, ...] = ()
    variables: Tuple[VariableDecl, ...] = ()
    invariants: Tuple[Invariant, ...] = ()
    events: Tuple[Event, ...] = ()
    annotations: Tuple[ClassAnnotation, ...] = ()
    layer: Optional[str] = None
    removed: Tuple[str, ...] = ()
    span: Optional["SourceSpan"] = _span()

    def annotation_for(self, class_name: str) -> Optional[ClassAnnotation]:
        for annotation in self.annotations:
            if annotation.class_name == class_name:
                return annotation
        return None

    def event(self, name: str) -> Optional[Event]:
        for event in self.events:
            if event.name == name:
                return event
        return None


@dataclass(frozen=True)
class RefinementChain:
    contexts: Tuple[Context, ...] = ()
    machines: Tuple[Machine, ...] = ()

    @property
    def annotations(self) -> Tuple[ClassAnnotation, ...]:
        return tuple(a for machine in self.machines for a in machine.annotations)

    @property
    def layer_labels(self) -> Dict[str, str]:
        return {m.name: m.layer for m in self.machines if m.layer is not None}

    def machine(self, name: str) -> Optional[Machine]:
        for machine in self.machines:
            if machine.name == name:
                return machine
        return None

    def context(self, name: str) -> Optional[Context]:
        for context in self.contexts:
            if context.name == name:
                return context
        return None


# --- traversal helpers ----------------------------------------------------


def children(node: Node) -> Iterator[Node]:
    """Direct sub-expressions and sub-predicates of a node"""
    if isinstance(node, SetExt):
        yield from node.elements
    elif isinstance(node, (Maplet, BinaryExpr, BinaryPred)):
        yield node.left
        yield node.right
    elif isinstance(node, Relational):
        yield node.left
        yield node.right
    elif isinstance(node, (UnaryExpr, Not)):
        yield node.operand
    elif isinstance(node, Image):
        yield node.relation
        yield node.argument
    elif isinstance(node, Apply):
        yield node.function
        yield node.argument
    elif isinstance(node, FunctionClass):
        yield node.element
        yield node.source
        yield node.target
    elif isinstance(node, Quantifier):
        for binder in node.binders:
            yield binder.typing
        yield node.body


def free_names(node: Node) -> frozenset:
    """Identifiers occurring free in an expression or predicate"""
    if isinstance(node, Name):
        return frozenset((node.name,))
    if isinstance(node, Quantifier):
        bound = set()
        names = set()
        # binder typings see earlier binders
        for binder in node.binders:
            names |= free_names(binder.typing) - bound
            bound.add(binder.name)
        names |= free_names(node.body) - bound
        return frozenset(names)
    result = set()
    for child in children(node):
        result |= free_names(child)
    return frozenset(result)


def conjuncts(predicate: Predicate) -> Tuple[Predicate, ...]:
    """Flatten nested conjunctions"""
    if isinstance(predicate, BinaryPred) and predicate.op == AND:
        return conjuncts(predicate.left) + conjuncts(predicate.right)
    return (predicate,)


def conjunction(predicates) -> Predicate:
    preds = list(predicates)
    if not preds:
        return Truth(True)
    result = preds[0]
    for pred in preds[1:]:
        result = BinaryPred(AND, result, pred)
    return result


def substitute(node: Node, mapping: Dict[str, Expression]) -> Node:
    """Replace free occurrences of names by expressions"""
    if not mapping:
        return node
    if isinstance(node, Name):
        return mapping.get(node.name, node)
    if isinstance(node, (AtomLit, Truth)):
        return node
    if isinstance(node, SetExt):
        return SetExt(tuple(substitute(e, mapping) for e in node.elements), node.span)
    if isinstance(node, Maplet):
        return Maplet(substitute(node.left, mapping), substitute(node.right, mapping), node.span)
    if isinstance(node, BinaryExpr):
        return BinaryExpr(
            node.op, substitute(node.left, mapping), substitute(node.right, mapping), node.span
        )
    if isinstance(node, UnaryExpr):
        return UnaryExpr(node.op, substitute(node.operand, mapping), node.span)
    if isinstance(node, Image):
        return Image(
            substitute(node.relation, mapping), substitute(node.argument, mapping), node.span
        )
    if isinstance(node, Apply):
        return Apply(
            substitute(node.function, mapping), substitute(node.argument, mapping), node.span
        )
    if isinstance(node, Relational):
        return Relational(
            node.op, substitute(node.left, mapping), substitute(node.right, mapping), node.span
        )
    if isinstance(node, FunctionClass):
        return FunctionClass(
            substitute(node.element, mapping),
            substitute(node.source, mapping),
            substitute(node.target, mapping),
            node.kind,
            node.span,
        )
    if isinstance(node, Not):
        return Not(substitute(node.operand, mapping), node.span)
    if isinstance(node, BinaryPred):
        return BinaryPred(
            node.op, substitute(node.left, mapping), substitute(node.right, mapping), node.span
        )
    if isinstance(node, Quantifier):
        inner = dict(mapping)
        binders = []
        for binder in node.binders:
            binders.append(Binder(binder.name, substitute(binder.typing, inner), binder.span))
            inner.pop(binder.name, None)
        return Quantifier(node.kind, tuple(binders), substitute(node.body, inner), node.span)
    raise TypeError(f"not an AST node: {node!r}")
