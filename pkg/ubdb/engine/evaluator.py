"""
Exact evaluator for set-theoretic expressions and predicates

Each AST node is compiled once into a Python closure over an environment
dict (carrier sets, constants, state variables, parameters, bound
variables). Compiled closures are cached per node.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from itertools import combinations
from typing import Any, Callable, Dict, Mapping, Optional

from ubdb.exceptions import EvaluationError, FunctionApplicationError, UnboundNameError
from ubdb.engine.values import (
    EMPTY,
    Atom,
    Scope,
    State,
    Value,
    format_value,
    sorted_values,
)
from ubdb.model import ast

Env = Dict[str, Value]
Compiled = Callable[[Env], Any]


def _domain(relation) -> frozenset:
    return frozenset(p[0] for p in relation)


def _range(relation) -> frozenset:
    return frozenset(p[1] for p in relation)


def _inverse(relation) -> frozenset:
    return frozenset((p[1], p[0]) for p in relation)


def _compose(first, second) -> frozenset:
    """Forward composition first ; second"""
    by_source: Dict[Value, list] = {}
    for b, c in second:
        by_source.setdefault(b, []).append(c)
    return frozenset((a, c) for a, b in first for c in by_source.get(b, ()))


def _override(f, g) -> frozenset:
    overridden = _domain(g)
    return frozenset(p for p in f if p[0] not in overridden) | g


def _powerset(values) -> frozenset:
    items = sorted_values(values)
    return frozenset(
        frozenset(subset) for size in range(len(items) + 1) for subset in combinations(items, size)
    )


def _product(left, right) -> frozenset:
    return frozenset((a, b) for a in left for b in right)


SET_OPS = {
    ast.UNION: lambda a, b: a | b,
    ast.MINUS: lambda a, b: a - b,
    ast.INTER: lambda a, b: a & b,
    ast.PRODUCT: _product,
    ast.DOMSUB: lambda s, r: frozenset(p for p in r if p[0] not in s),
    ast.DOMRES: lambda s, r: frozenset(p for p in r if p[0] in s),
    ast.OVERRIDE: _override,
    ast.COMPOSE: _compose,
}

UNARY_OPS = {
    ast.DOM: _domain,
    ast.RAN: _range,
    ast.INVERSE: _inverse,
    ast.POW: _powerset,
}


def satisfies_function_class(relation, source, target, kind: ast.RelationKind) -> bool:
    """Finite definition of relation / partial / total / injective function classes"""
    if not isinstance(relation, frozenset):
        return False
    images: Dict[Value, Value] = {}
    preimages: Dict[Value, Value] = {}
    for pair in relation:
        if not isinstance(pair, tuple):
            return False
        x, y = pair
        if x not in source or y not in target:
            return False
        if kind.is_function:
            if x in images and images[x] != y:
                return False
            images[x] = y
        if kind.injective:
            if y in preimages and preimages[y] != x:
                return False
            preimages[y] = x
    if kind.is_total:
        return len(images) == len(source)
    return True


class Evaluator:
    """
    Compiles and evaluates nodes against a base environment.

    The base environment holds every carrier set of the scope and the
    machine's constants; states and bindings are layered on top per call.
    """

    def __init__(self, scope: Scope, constants=(), machine=None):
        self.scope = scope
        self.machine = machine
        self._cache: Dict[int, tuple] = {}
        self.base: Env = {carrier: frozenset(scope.atoms(carrier)) for carrier, _ in scope.bounds}
        for constant in constants:
            self.base[constant.name] = self.compile(constant.value)(self.base)

    @classmethod
    def for_machine(cls, machine, scope: Scope) -> "Evaluator":
        return cls(scope, machine.constants, machine)

    # --- environments ----------------------------------------------------

    def environment(self, state: Optional[State] = None, binding: Optional[Mapping] = None) -> Env:
        env = dict(self.base)
        if state is not None:
            env.update(zip(state.names, state.values))
        if binding:
            env.update(binding)
        return env

    def evaluate(self, node, state=None, binding=None):
        return self.compile(node)(self.environment(state, binding))

    def holds(self, pred, state=None, binding=None) -> bool:
        return bool(self.compile(pred)(self.environment(state, binding)))

    # --- compilation -----------------------------------------------------

    def compile(self, node) -> Compiled:
        cached = self._cache.get(id(node))
        if cached is not None and cached[0] is node:
            return cached[1]
        compiled = self._compile(node)
        self._cache[id(node)] = (node, compiled)
        return compiled

    def _compile(self, node) -> Compiled:
        method = getattr(self, f"_c_{type(node).__name__}", None)
        if method is None:
            raise EvaluationError(f"cannot evaluate node {type(node).__name__}")
        return method(node)

    # expressions

    def _c_Name(self, node: ast.Name) -> Compiled:
        name = node.name

        def lookup(env):
            try:
                return env[name]
            except KeyError:
                raise UnboundNameError(f"'{name}' has no value", name=name) from None

        return lookup

    def _c_AtomLit(self, node: ast.AtomLit) -> Compiled:
        atom = Atom(node.carrier, node.index)
        return lambda env: atom

    def _c_SetExt(self, node: ast.SetExt) -> Compiled:
        parts = [self.compile(e) for e in node.elements]
        if not parts:
            return lambda env: EMPTY
        return lambda env: frozenset(p(env) for p in parts)

    def _c_Maplet(self, node: ast.Maplet) -> Compiled:
        left, right = self.compile(node.left), self.compile(node.right)
        return lambda env: (left(env), right(env))

    def _c_BinaryExpr(self, node: ast.BinaryExpr) -> Compiled:
        op = SET_OPS[node.op]
        left, right = self.compile(node.left), self.compile(node.right)
        return lambda env: op(left(env), right(env))

    def _c_UnaryExpr(self, node: ast.UnaryExpr) -> Compiled:
        op = UNARY_OPS[node.op]
        operand = self.compile(node.operand)
        return lambda env: op(operand(env))

    def _c_Image(self, node: ast.Image) -> Compiled:
        relation, argument = self.compile(node.relation), self.compile(node.argument)

        def image(env):
            points = argument(env)
            return frozenset(p[1] for p in relation(env) if p[0] in points)

        return image

    def _c_Apply(self, node: ast.Apply) -> Compiled:
        function, argument = self.compile(node.function), self.compile(node.argument)
        label = _describe(node.function)

        def apply(env):
            x = argument(env)
            results = [p[1] for p in function(env) if p[0] == x]
            if len(results) != 1:
                reason = "outside its domain" if not results else "where it is not functional"
                raise FunctionApplicationError(
                    f"{label} applied to {format_value(x)} {reason}",
                    function=label,
                    argument=format_value(x),
                )
            return results[0]

        return apply

    # predicates

    def _c_Truth(self, node: ast.Truth) -> Compiled:
        value = node.value
        return lambda env: value

    def _c_Relational(self, node: ast.Relational) -> Compiled:
        left, right = self.compile(node.left), self.compile(node.right)
        op = node.op
        if op == ast.MEMBER:
            return lambda env: left(env) in right(env)
        if op == ast.NOT_MEMBER:
            return lambda env: left(env) not in right(env)
        if op == ast.SUBSET:
            return lambda env: left(env) <= right(env)
        if op == ast.EQUAL:
            return lambda env: left(env) == right(env)
        if op == ast.NOT_EQUAL:
            return lambda env: left(env) != right(env)
        raise EvaluationError(f"unknown relational operator {op}")

    def _c_FunctionClass(self, node: ast.FunctionClass) -> Compiled:
        element = self.compile(node.element)
        source, target = self.compile(node.source), self.compile(node.target)
        kind = node.kind
        return lambda env: satisfies_function_class(element(env), source(env), target(env), kind)

    def _c_Not(self, node: ast.Not) -> Compiled:
        operand = self.compile(node.operand)
        return lambda env: not operand(env)

    def _c_BinaryPred(self, node: ast.BinaryPred) -> Compiled:
        left, right = self.compile(node.left), self.compile(node.right)
        op = node.op
        if op == ast.AND:
            return lambda env: bool(left(env)) and bool(right(env))
        if op == ast.OR:
            return lambda env: bool(left(env)) or bool(right(env))
        if op == ast.IMPLIES:
            return lambda env: (not left(env)) or bool(right(env))
        if op == ast.EQUIV:
            return lambda env: bool(left(env)) == bool(right(env))
        raise EvaluationError(f"unknown connective {op}")

    def _c_Quantifier(self, node: ast.Quantifier) -> Compiled:
        names = [b.name for b in node.binders]
        typings = [self.compile(b.typing) for b in node.binders]
        body = self.compile(node.body)
        universal = node.kind == ast.FORALL
        depth = len(names)

        def search(level: int, local: Env) -> bool:
            if level == depth:
                return bool(body(local))
            name = names[level]
            for value in sorted_values(typings[level](local)):
                local[name] = value
                if search(level + 1, local) != universal:
                    return not universal
            return universal

        return lambda env: search(0, dict(env))


def _describe(expr) -> str:
    if isinstance(expr, ast.Name):
        return expr.name
    return type(expr).__name__


def evaluate(expr, state: State, binding: Optional[Mapping] = None, scope: Optional[Scope] = None, machine=None):
    """Denotation of an expression in a state under a scope"""
    evaluator = Evaluator(scope or Scope(), machine.constants if machine else (), machine)
    return evaluator.evaluate(expr, state, binding)


def evaluate_predicate(pred, state: State, binding: Optional[Mapping] = None, scope: Optional[Scope] = None, machine=None) -> bool:
    """Truth value of a predicate in a state under a scope"""
    evaluator = Evaluator(scope or Scope(), machine.constants if machine else (), machine)
    return evaluator.holds(pred, state, binding)
