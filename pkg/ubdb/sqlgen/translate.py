"""
Set expressions and predicates to SQL

Sets become single-column subqueries (`v`), relations two-column subqueries
(`s`, `t`), predicates boolean conditions. Names bound by the caller (event
parameters, quantified variables) are passed in an environment of scalar SQL.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

from ubdb.model import ast
from ubdb.parser.printer import format_node
from ubdb.sqlgen.mapping import RelationalMapping
from ubdb.sqlgen.schema import PLACE_COLUMN, PLACE_JOIN, id_column, sql_literal, value_text

Env = Dict[str, str]

TRUE_SQL = "1 = 1"
FALSE_SQL = "1 = 0"

_RELATION_OPERATORS = (ast.COMPOSE, ast.DOMSUB, ast.DOMRES, ast.OVERRIDE, ast.PRODUCT)
_COMPOUND = {ast.UNION: "UNION", ast.INTER: "INTERSECT", ast.MINUS: "EXCEPT"}


class Untranslatable(Exception):
    """Expression or predicate outside the SQL fragment"""


@dataclass(frozen=True)
class SetSql:
    """A set as a subquery, or as a literal list of scalars"""

    query: Optional[str] = None
    items: Tuple[str, ...] = ()

    def select(self) -> str:
        if self.query is not None:
            return self.query
        if not self.items:
            return "SELECT NULL AS v WHERE 1 = 0"
        return " UNION ".join(f"SELECT {item} AS v" for item in self.items)

    def membership(self, scalar: str) -> str:
        if self.query is not None:
            return f"{scalar} IN ({self.query})"
        if not self.items:
            return FALSE_SQL
        return f"{scalar} IN ({', '.join(self.items)})"


class SqlTranslator:
    def __init__(self, mapping: RelationalMapping, quote: Callable[[str], str]):
        self.mapping = mapping
        self.machine = mapping.machine
        self.quote = quote
        self.constants = self.machine.constant_map()
        self._aliases = itertools.count(1)

    def alias(self) -> str:
        return f"x{next(self._aliases)}"

    def column(self, alias: str, name: str) -> str:
        return f"{alias}.{self.quote(name)}"

    # --- classification ---------------------------------------------------

    def _constant(self, expr) -> Optional[ast.Expression]:
        if isinstance(expr, ast.Name) and expr.name in self.constants:
            return self.constants[expr.name].value
        return None

    def is_carrier(self, expr) -> bool:
        return isinstance(expr, ast.Name) and expr.name in self.machine.carriers

    def is_relation(self, expr) -> bool:
        constant = self._constant(expr)
        if constant is not None:
            return self.is_relation(constant)
        if isinstance(expr, ast.Name):
            placement = self.mapping.placement(expr.name)
            return placement is not None and placement.kind in (PLACE_COLUMN, PLACE_JOIN)
        if isinstance(expr, ast.SetExt):
            return bool(expr.elements) and all(isinstance(e, ast.Maplet) for e in expr.elements)
        if isinstance(expr, ast.UnaryExpr):
            return expr.op == ast.INVERSE
        if isinstance(expr, ast.BinaryExpr):
            if expr.op in _RELATION_OPERATORS:
                return True
            return self.is_relation(expr.left) or self.is_relation(expr.right)
        return False

    def is_scalar(self, expr, env: Env) -> bool:
        constant = self._constant(expr)
        if constant is not None:
            return self.is_scalar(constant, env)
        if isinstance(expr, ast.Name):
            return expr.name in env
        return isinstance(expr, (ast.AtomLit, ast.Apply))

    # --- scalars -----------------------------------------------------------

    def scalar(self, expr, env: Env) -> str:
        constant = self._constant(expr)
        if constant is not None:
            return self.scalar(constant, env)
        if isinstance(expr, ast.Name):
            if expr.name in env:
                return env[expr.name]
            raise Untranslatable(f"'{expr.name}' is not a single value")
        if isinstance(expr, ast.AtomLit):
            if expr.carrier in self.machine.class_carriers():
                raise Untranslatable(f"class atom literal {expr.carrier}.{expr.index} has no fixed row id")
            return sql_literal(value_text(expr.carrier, expr.index))
        if isinstance(expr, ast.Apply):
            return self._apply(expr, env)
        raise Untranslatable(f"{type(expr).__name__} is not a single value")

    def _apply(self, expr: ast.Apply, env: Env) -> str:
        argument = self.scalar(expr.argument, env)
        a = self.alias()
        if isinstance(expr.function, ast.Name):
            placement = self.mapping.placement(expr.function.name)
            if placement is not None and placement.kind == PLACE_COLUMN:
                return (
                    f"(SELECT {self.column(a, placement.column)} FROM {self.quote(placement.table)} AS {a} "
                    f"WHERE {self.column(a, placement.source_column)} = {argument})"
                )
        relation = self.relation(expr.function, env)
        return f"(SELECT {a}.t FROM ({relation}) AS {a} WHERE {a}.s = {argument})"

    # --- sets --------------------------------------------------------------

    def set(self, expr, env: Env) -> SetSql:
        constant = self._constant(expr)
        if constant is not None:
            return self.set(constant, env)
        if isinstance(expr, ast.Name):
            if self.mapping.is_class(expr.name):
                a = self.alias()
                return SetSql(
                    query=f"SELECT {self.column(a, id_column(expr.name))} AS v FROM {self.quote(expr.name)} AS {a}"
                )
            if self.is_carrier(expr):
                raise Untranslatable(f"carrier set {expr.name} has no table")
            raise Untranslatable(f"'{expr.name}' is not a set of single values")
        if isinstance(expr, ast.SetExt):
            if any(isinstance(e, ast.Maplet) for e in expr.elements):
                raise Untranslatable("set of pairs used where a set of single values is expected")
            return SetSql(items=tuple(self.scalar(e, env) for e in expr.elements))
        if isinstance(expr, ast.BinaryExpr) and expr.op in _COMPOUND:
            left = self.set(expr.left, env).select()
            right = self.set(expr.right, env).select()
            a, b = self.alias(), self.alias()
            return SetSql(
                query=f"SELECT {a}.v AS v FROM ({left}) AS {a} {_COMPOUND[expr.op]} SELECT {b}.v AS v FROM ({right}) AS {b}"
            )
        if isinstance(expr, ast.UnaryExpr) and expr.op in (ast.DOM, ast.RAN):
            relation = self.relation(expr.operand, env)
            a = self.alias()
            end = "s" if expr.op == ast.DOM else "t"
            return SetSql(query=f"SELECT {a}.{end} AS v FROM ({relation}) AS {a}")
        if isinstance(expr, ast.Image):
            relation = self.relation(expr.relation, env)
            argument = self.set(expr.argument, env)
            a = self.alias()
            return SetSql(
                query=f"SELECT {a}.t AS v FROM ({relation}) AS {a} WHERE {argument.membership(f'{a}.s')}"
            )
        raise Untranslatable(f"{_describe(expr)} has no SQL set form")

    # --- relations ---------------------------------------------------------

    def relation(self, expr, env: Env) -> str:
        constant = self._constant(expr)
        if constant is not None:
            return self.relation(constant, env)
        if isinstance(expr, ast.Name):
            return self._stored_relation(expr.name)
        if isinstance(expr, ast.SetExt):
            if not expr.elements:
                return "SELECT NULL AS s, NULL AS t WHERE 1 = 0"
            rows = []
            for element in expr.elements:
                if not isinstance(element, ast.Maplet):
                    raise Untranslatable("set of single values used where a relation is expected")
                rows.append(f"SELECT {self.scalar(element.left, env)} AS s, {self.scalar(element.right, env)} AS t")
            return " UNION ".join(rows)
        if isinstance(expr, ast.UnaryExpr) and expr.op == ast.INVERSE:
            inner = self.relation(expr.operand, env)
            a = self.alias()
            return f"SELECT {a}.t AS s, {a}.s AS t FROM ({inner}) AS {a}"
        if isinstance(expr, ast.BinaryExpr):
            return self._relation_operator(expr, env)
        raise Untranslatable(f"{_describe(expr)} has no SQL relation form")

    def _stored_relation(self, name: str) -> str:
        placement = self.mapping.placement(name)
        if placement is None or placement.kind not in (PLACE_COLUMN, PLACE_JOIN):
            raise Untranslatable(f"'{name}' is not a stored relation")
        a = self.alias()
        source = self.column(a, placement.source_column)
        target = self.column(a, placement.column)
        query = f"SELECT {source} AS s, {target} AS t FROM {self.quote(placement.table)} AS {a}"
        if placement.kind == PLACE_COLUMN:
            query += f" WHERE {target} IS NOT NULL"
        return query

    def _relation_operator(self, expr: ast.BinaryExpr, env: Env) -> str:
        a, b = self.alias(), self.alias()
        if expr.op in _COMPOUND:
            left = self.relation(expr.left, env)
            right = self.relation(expr.right, env)
            return (
                f"SELECT {a}.s AS s, {a}.t AS t FROM ({left}) AS {a} {_COMPOUND[expr.op]} "
                f"SELECT {b}.s AS s, {b}.t AS t FROM ({right}) AS {b}"
            )
        if expr.op == ast.COMPOSE:
            left = self.relation(expr.left, env)
            right = self.relation(expr.right, env)
            return f"SELECT {a}.s AS s, {b}.t AS t FROM ({left}) AS {a} JOIN ({right}) AS {b} ON {a}.t = {b}.s"
        if expr.op in (ast.DOMRES, ast.DOMSUB):
            domain = self.set(expr.left, env)
            relation = self.relation(expr.right, env)
            test = domain.membership(f"{a}.s")
            if expr.op == ast.DOMSUB:
                test = f"NOT ({test})"
            return f"SELECT {a}.s AS s, {a}.t AS t FROM ({relation}) AS {a} WHERE {test}"
        if expr.op == ast.OVERRIDE:
            base = self.relation(expr.left, env)
            update = self.relation(expr.right, env)
            c = self.alias()
            return (
                f"SELECT {b}.s AS s, {b}.t AS t FROM ({update}) AS {b} UNION "
                f"SELECT {a}.s AS s, {a}.t AS t FROM ({base}) AS {a} "
                f"WHERE {a}.s NOT IN (SELECT {c}.s FROM ({update}) AS {c})"
            )
        if expr.op == ast.PRODUCT:
            left = self.set(expr.left, env).select()
            right = self.set(expr.right, env).select()
            return f"SELECT {a}.v AS s, {b}.v AS t FROM ({left}) AS {a}, ({right}) AS {b}"
        raise Untranslatable(f"operator {expr.op} has no SQL relation form")

    # --- predicates --------------------------------------------------------

    def condition(self, pred, env: Env) -> str:
        if isinstance(pred, ast.Truth):
            return TRUE_SQL if pred.value else FALSE_SQL
        if isinstance(pred, ast.Not):
            return f"NOT ({self.condition(pred.operand, env)})"
        if isinstance(pred, ast.BinaryPred):
            left = self.condition(pred.left, env)
            right = self.condition(pred.right, env)
            if pred.op == ast.AND:
                return f"({left}) AND ({right})"
            if pred.op == ast.OR:
                return f"({left}) OR ({right})"
            if pred.op == ast.IMPLIES:
                return f"NOT ({left}) OR ({right})"
            return f"(({left}) AND ({right})) OR (NOT ({left}) AND NOT ({right}))"
        if isinstance(pred, ast.Relational):
            return self._relational(pred, env)
        if isinstance(pred, ast.Quantifier):
            return self._quantifier(pred, env)
        raise Untranslatable(f"{_describe(pred)} has no SQL condition form")

    def _relational(self, pred: ast.Relational, env: Env) -> str:
        if pred.op in (ast.MEMBER, ast.NOT_MEMBER):
            test = self.member(pred.left, pred.right, env)
            return test if pred.op == ast.MEMBER else f"NOT ({test})"
        if pred.op == ast.SUBSET:
            return self.subset(pred.left, pred.right, env)
        if self.is_scalar(pred.left, env) and self.is_scalar(pred.right, env):
            operator = "=" if pred.op == ast.EQUAL else "<>"
            return f"{self.scalar(pred.left, env)} {operator} {self.scalar(pred.right, env)}"
        both = f"({self.subset(pred.left, pred.right, env)}) AND ({self.subset(pred.right, pred.left, env)})"
        return both if pred.op == ast.EQUAL else f"NOT ({both})"

    def member(self, element, collection, env: Env) -> str:
        if self.is_carrier(collection):
            return TRUE_SQL
        if isinstance(collection, ast.BinaryExpr) and collection.op == ast.MINUS and self.is_carrier(collection.left):
            # fresh element: CARRIER \ S
            return f"NOT ({self.member(element, collection.right, env)})"
        if isinstance(collection, ast.UnaryExpr) and collection.op == ast.POW:
            return self.subset(element, collection.operand, env)
        if isinstance(element, ast.Maplet):
            relation = self.relation(collection, env)
            a = self.alias()
            return (
                f"EXISTS (SELECT 1 FROM ({relation}) AS {a} WHERE {a}.s = {self.scalar(element.left, env)} "
                f"AND {a}.t = {self.scalar(element.right, env)})"
            )
        return self.set(collection, env).membership(self.scalar(element, env))

    def subset(self, small, large, env: Env) -> str:
        if self.is_carrier(large):
            return TRUE_SQL
        a, b = self.alias(), self.alias()
        if self.is_relation(small) or self.is_relation(large):
            inner = self.relation(small, env)
            outer = self.relation(large, env)
            return (
                f"NOT EXISTS (SELECT 1 FROM ({inner}) AS {a} WHERE NOT EXISTS "
                f"(SELECT 1 FROM ({outer}) AS {b} WHERE {b}.s = {a}.s AND {b}.t = {a}.t))"
            )
        inner = self.set(small, env).select()
        container = self.set(large, env)
        return f"NOT EXISTS (SELECT 1 FROM ({inner}) AS {a} WHERE NOT ({container.membership(f'{a}.v')}))"

    def _quantifier(self, pred: ast.Quantifier, env: Env) -> str:
        sources = []
        inner = dict(env)
        bound = set()
        for binder in pred.binders:
            if ast.free_names(binder.typing) & bound:
                raise Untranslatable(f"typing of '{binder.name}' depends on another bound variable")
            a = self.alias()
            typing = binder.typing
            if isinstance(typing, ast.Name) and self.mapping.is_class(typing.name):
                sources.append(f"{self.quote(typing.name)} AS {a}")
                inner[binder.name] = self.column(a, id_column(typing.name))
            elif self.is_carrier(typing):
                raise Untranslatable(f"'{binder.name}' ranges over the carrier set {typing.name}")
            else:
                sources.append(f"({self.set(typing, env).select()}) AS {a}")
                inner[binder.name] = f"{a}.v"
            bound.add(binder.name)
        body = self.condition(pred.body, inner)
        frm = ", ".join(sources)
        if pred.kind == ast.EXISTS:
            return f"EXISTS (SELECT 1 FROM {frm} WHERE {body})"
        return f"NOT EXISTS (SELECT 1 FROM {frm} WHERE NOT ({body}))"


def _describe(node) -> str:
    try:
        return f"'{format_node(node)}'"
    except TypeError:
        return type(node).__name__


# --- single-row CHECK constraints ---------------------------------------------


def row_check(invariant: ast.Invariant, mapping: RelationalMapping, quote: Callable[[str], str]) -> Optional[Tuple[str, str]]:
    """
    (table, CHECK text) for `!x : C . P(x)` where P only reads total columns of
    C and value literals; None for any other invariant.
    """
    pred = invariant.predicate
    if not isinstance(pred, ast.Quantifier) or pred.kind != ast.FORALL or len(pred.binders) != 1:
        return None
    binder = pred.binders[0]
    if not (isinstance(binder.typing, ast.Name) and mapping.is_class(binder.typing.name)):
        return None
    table = binder.typing.name
    try:
        text = _RowCondition(mapping, quote, table, binder.name).condition(pred.body)
    except Untranslatable:
        return None
    return table, text


class _RowCondition:
    def __init__(self, mapping: RelationalMapping, quote, table: str, variable: str):
        self.mapping = mapping
        self.quote = quote
        self.table = table
        self.variable = variable

    def condition(self, pred) -> str:
        if isinstance(pred, ast.Not):
            return f"NOT ({self.condition(pred.operand)})"
        if isinstance(pred, ast.BinaryPred):
            left, right = self.condition(pred.left), self.condition(pred.right)
            if pred.op == ast.AND:
                return f"({left}) AND ({right})"
            if pred.op == ast.OR:
                return f"({left}) OR ({right})"
            if pred.op == ast.IMPLIES:
                return f"NOT ({left}) OR ({right})"
            raise Untranslatable("equivalence")
        if isinstance(pred, ast.Relational):
            left = self.value(pred.left)
            if pred.op in (ast.EQUAL, ast.NOT_EQUAL):
                operator = "=" if pred.op == ast.EQUAL else "<>"
                return f"{left} {operator} {self.value(pred.right)}"
            if pred.op in (ast.MEMBER, ast.NOT_MEMBER) and isinstance(pred.right, ast.SetExt):
                items = ", ".join(self.value(e) for e in pred.right.elements) or "NULL"
                test = f"{left} IN ({items})"
                return test if pred.op == ast.MEMBER else f"NOT ({test})"
        raise Untranslatable("not a single-row condition")

    def value(self, expr) -> str:
        if isinstance(expr, ast.AtomLit):
            if expr.carrier in self.mapping.machine.class_carriers():
                raise Untranslatable("class atom literal")
            return sql_literal(value_text(expr.carrier, expr.index))
        if (
            isinstance(expr, ast.Apply)
            and isinstance(expr.function, ast.Name)
            and isinstance(expr.argument, ast.Name)
            and expr.argument.name == self.variable
        ):
            placement = self.mapping.placement(expr.function.name)
            decl = self.mapping.machine.variable(expr.function.name)
            if (
                placement is not None
                and placement.kind == PLACE_COLUMN
                and placement.table == self.table
                and decl.typing.kind.is_total
            ):
                return self.quote(placement.column)
        raise Untranslatable("not a column of the row")
