"""
Events to stored procedures

Every procedure checks all of its guards before touching data. Data
modification is ordered so that each statement only reads values no earlier
statement has changed: class inserts (superclasses first), column updates,
join-table deletes and inserts, then class deletes (referencing tables first).
That keeps the simultaneous-assignment meaning of the event's actions.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass, replace
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

from ubdb.exceptions import UnsupportedActionError, UnsupportedGuardError
from ubdb.model import ast
from ubdb.model.chain import ResolvedEvent, ResolvedMachine
from ubdb.sqlgen.ddl import get_dialect, quoter, schema_for
from ubdb.sqlgen.mapping import RelationalMapping
from ubdb.sqlgen.schema import (
    ID_TYPE,
    PLACE_CLASS,
    PLACE_COLUMN,
    DmlStep,
    GuardCheck,
    Placement,
    ProcedureDef,
    QueryOutput,
    id_column,
    param_name,
    param_ref,
    strip_param_markers,
    value_sql_type,
)
from ubdb.sqlgen.script import SqlScript
from ubdb.sqlgen.translate import SqlTranslator, Untranslatable
from ubdb.utils.logger import get_logger

logger = get_logger()

_INSERT, _DELETE, _OVERRIDE = ast.UNION, ast.MINUS, ast.OVERRIDE
_CLEAR = "clear"
_KEEP = "keep"
_REPLACE = "replace"


def _shape(action: ast.Action) -> Tuple[str, Optional[ast.Expression]]:
    """(operation, operand) of `v := v op e`, `v := e op v`, `v := {}`, `v := v`"""
    expr = action.expression
    target = action.target
    if isinstance(expr, ast.BinaryExpr):
        if expr.op in (_INSERT, _DELETE, _OVERRIDE) and isinstance(expr.left, ast.Name) and expr.left.name == target:
            return expr.op, expr.right
        if expr.op in (ast.DOMSUB, ast.DOMRES) and isinstance(expr.right, ast.Name) and expr.right.name == target:
            return expr.op, expr.left
    if isinstance(expr, ast.SetExt) and not expr.elements:
        return _CLEAR, None
    if isinstance(expr, ast.Name) and expr.name == target:
        return _KEEP, None
    return _REPLACE, expr


def _single(expr) -> Optional[ast.Expression]:
    if isinstance(expr, ast.SetExt) and len(expr.elements) == 1 and not isinstance(expr.elements[0], ast.Maplet):
        return expr.elements[0]
    return None


def _single_pair(expr) -> Optional[ast.Maplet]:
    if isinstance(expr, ast.SetExt) and len(expr.elements) == 1 and isinstance(expr.elements[0], ast.Maplet):
        return expr.elements[0]
    return None


def defining_equations(event: ResolvedEvent) -> Dict[str, Tuple[ast.Expression, ast.Predicate]]:
    """
    Query outputs: parameters fixed by a guard conjunct `p = e` where e reads
    no other output. Returns {parameter: (e, conjunct)}.
    """
    params = set(event.parameter_names)
    candidates: Dict[str, Tuple[ast.Expression, ast.Predicate]] = {}
    for guard in event.guards:
        for part in ast.conjuncts(guard.predicate):
            if not isinstance(part, ast.Relational) or part.op != ast.EQUAL:
                continue
            for this, other in ((part.left, part.right), (part.right, part.left)):
                if (
                    isinstance(this, ast.Name)
                    and this.name in params
                    and this.name not in candidates
                    and this.name not in ast.free_names(other)
                ):
                    candidates[this.name] = (other, part)
                    break
    changed = True
    while changed:
        changed = False
        for name in list(candidates):
            if ast.free_names(candidates[name][0]) & (set(candidates) - {name}):
                del candidates[name]
                changed = True
    return candidates


@dataclass(frozen=True)
class _Statement:
    labels: Tuple[str, ...]
    sql: str
    table: str
    reads: FrozenSet[str]
    writes: FrozenSet[str]


class ProcedureBuilder:
    """Builds one ProcedureDef per event of a flattened machine"""

    def __init__(self, mapping: RelationalMapping, quote: Callable[[str], str]):
        self.mapping = mapping
        self.machine: ResolvedMachine = mapping.machine
        self.quote = quote
        self.translator = SqlTranslator(mapping, quote)

    # --- parameters ------------------------------------------------------

    def element_carrier(self, expr) -> Optional[str]:
        """Carrier set of the elements of a typing expression"""
        machine = self.machine
        if isinstance(expr, ast.Name):
            constant = machine.constant_map().get(expr.name)
            if constant is not None:
                return self.element_carrier(constant.value)
            return machine.carrier_of(expr.name)
        if isinstance(expr, ast.UnaryExpr) and expr.op in (ast.DOM, ast.RAN):
            return self._end_carrier(expr.operand, source=expr.op == ast.DOM)
        if isinstance(expr, ast.Image):
            return self._end_carrier(expr.relation, source=False)
        if isinstance(expr, ast.BinaryExpr) and expr.op in (ast.UNION, ast.INTER, ast.MINUS):
            return self.element_carrier(expr.left) or self.element_carrier(expr.right)
        if isinstance(expr, ast.SetExt):
            for element in expr.elements:
                if isinstance(element, ast.AtomLit):
                    return element.carrier
        return None

    def _end_carrier(self, relation, source: bool) -> Optional[str]:
        if isinstance(relation, ast.UnaryExpr) and relation.op == ast.INVERSE:
            return self._end_carrier(relation.operand, not source)
        if isinstance(relation, ast.Name):
            placement = self.mapping.placement(relation.name)
            if placement is not None and placement.kind != PLACE_CLASS:
                return placement.source_carrier if source else placement.target_carrier
        return None

    def sql_type(self, carrier: str) -> str:
        return ID_TYPE if carrier in self.machine.class_carriers() else value_sql_type(carrier)

    def _param_type(self, event: ResolvedEvent, parameter: ast.Parameter) -> str:
        typing = parameter.typing
        if isinstance(typing, ast.UnaryExpr) and typing.op == ast.POW:
            raise UnsupportedGuardError(
                f"Event '{event.name}': parameter '{parameter.name}' is set-valued",
                event=event.name,
                label=parameter.name,
            )
        carrier = self.element_carrier(typing)
        if carrier is None:
            raise UnsupportedGuardError(
                f"Event '{event.name}': cannot find the column type of parameter '{parameter.name}'",
                event=event.name,
                label=parameter.name,
            )
        return self.sql_type(carrier)

    # --- guards ----------------------------------------------------------

    def _condition(self, event: ResolvedEvent, label: str, pred, env) -> str:
        try:
            return self.translator.condition(pred, env)
        except Untranslatable as e:
            raise UnsupportedGuardError(
                f"Event '{event.name}', guard {label}: {e}", event=event.name, label=label
            ) from e

    def _guards(self, event: ResolvedEvent, inputs: Sequence[ast.Parameter], outputs, env) -> List[GuardCheck]:
        checks = []
        for parameter in inputs:
            if self.translator.is_carrier(parameter.typing):
                continue
            label = f"type_{parameter.name}"
            pred = ast.Relational(ast.MEMBER, ast.Name(parameter.name), parameter.typing)
            checks.append(GuardCheck(label, self._condition(event, label, pred, env)))
        definitions = {name: expr for name, (expr, _) in outputs.items()}
        defining = [part for _, part in outputs.values()]
        for guard in event.guards:
            parts = [p for p in ast.conjuncts(guard.predicate) if not any(p is d for d in defining)]
            if not parts:
                continue
            pred = ast.substitute(ast.conjunction(parts), definitions)
            checks.append(GuardCheck(guard.label, self._condition(event, guard.label, pred, env)))
        for parameter in event.parameters:
            if parameter.name not in outputs or self._trivial_typing(parameter.typing):
                continue
            label = f"type_{parameter.name}"
            pred = ast.Relational(ast.MEMBER, definitions[parameter.name], parameter.typing)
            checks.append(GuardCheck(label, self._condition(event, label, pred, env)))
        return checks

    def _trivial_typing(self, typing) -> bool:
        if isinstance(typing, ast.UnaryExpr) and typing.op == ast.POW:
            typing = typing.operand
        return self.translator.is_carrier(typing)

    # --- outputs ---------------------------------------------------------

    def _outputs(self, event: ResolvedEvent, outputs, env) -> List[QueryOutput]:
        result = []
        typing = {p.name: p.typing for p in event.parameters}
        for name in event.parameter_names:
            if name not in outputs:
                continue
            expr = outputs[name][0]
            declared = typing[name]
            is_set = isinstance(declared, ast.UnaryExpr) and declared.op == ast.POW
            carrier = self.element_carrier(declared.operand if is_set else declared)
            try:
                if is_set:
                    sql = self.translator.set(expr, env).select()
                else:
                    sql = f"SELECT {self.translator.scalar(expr, env)} AS v"
            except Untranslatable as e:
                raise UnsupportedGuardError(
                    f"Event '{event.name}': output '{name}': {e}", event=event.name, label=name
                ) from e
            sql_type = self.sql_type(carrier) if carrier else ID_TYPE
            result.append(QueryOutput(name, sql, sql_type, is_set))
        return result

    # --- procedures ------------------------------------------------------

    def build(self, event: ResolvedEvent) -> ProcedureDef:
        outputs = defining_equations(event) if event.kind == "query" else {}
        inputs = [p for p in event.parameters if p.name not in outputs]
        env = {p.name: param_ref(p.name) for p in inputs}
        params = tuple((p.name, self._param_type(event, p)) for p in inputs)
        guards = self._guards(event, inputs, outputs, env)
        if event.kind == "query":
            if event.actions:
                raise UnsupportedActionError(
                    f"Query event '{event.name}' assigns {', '.join(event.targets)}",
                    event=event.name,
                    label=event.actions[0].label,
                )
            steps: Tuple[DmlStep, ...] = ()
            query_outputs = tuple(self._outputs(event, outputs, env))
        else:
            statements = _Planner(self, event, env).plan()
            steps = tuple(DmlStep(s.labels, s.sql, s.table) for s in statements)
            query_outputs = ()
        procedure = ProcedureDef(
            name=event.name,
            kind=event.kind,
            params=params,
            guards=tuple(guards),
            steps=steps,
            outputs=query_outputs,
        )
        logger.debug(f"procedure {event.name}: {len(guards)} guard(s), {len(steps)} step(s)")
        return replace(procedure, body=render_procedure(procedure))


class _Planner:
    """Orders the data modification of one event"""

    def __init__(self, builder: ProcedureBuilder, event: ResolvedEvent, env):
        self.builder = builder
        self.mapping = builder.mapping
        self.translator = builder.translator
        self.quote = builder.quote
        self.event = event
        self.env = env
        self.params = frozenset(event.parameter_names)
        self._label = None

    def _unsupported(self, label: str, message: str) -> UnsupportedActionError:
        return UnsupportedActionError(
            f"Event '{self.event.name}', action {label}: {message}", event=self.event.name, label=label
        )

    def _reads(self, *nodes) -> FrozenSet[str]:
        names = set()
        for node in nodes:
            if node is not None:
                names |= ast.free_names(node)
        return frozenset(names - self.params)

    # sql helpers; Untranslatable is converted by plan()
    def _set(self, expr):
        return self.translator.set(expr, self.env)

    def _relation(self, expr) -> str:
        return self.translator.relation(expr, self.env)

    def _scalar(self, expr) -> str:
        return self.translator.scalar(expr, self.env)

    def plan(self) -> List[_Statement]:
        inserts: Dict[str, Tuple[ast.Action, ast.Expression]] = {}
        deletes: Dict[str, Tuple[ast.Action, Optional[ast.Expression]]] = {}
        others: List[Tuple[ast.Action, Placement, str, Optional[ast.Expression]]] = []
        for action in self.event.actions:
            placement = self.mapping.placement(action.target)
            if placement is None:
                raise self._unsupported(action.label, f"'{action.target}' has no table or column")
            op, operand = _shape(action)
            if placement.kind == PLACE_CLASS:
                if op == _INSERT:
                    inserts[action.target] = (action, operand)
                elif op in (_DELETE, _CLEAR):
                    deletes[action.target] = (action, operand)
                elif op != _KEEP:
                    raise self._unsupported(action.label, "class sets only grow by union or shrink by difference")
            else:
                others.append((action, placement, op, operand))

        consumed_insert: Dict[str, List[Tuple[ast.Action, Placement, ast.Expression]]] = {c: [] for c in inserts}
        consumed_delete: Dict[str, List[ast.Action]] = {c: [] for c in deletes}
        remaining = []
        for action, placement, op, operand in others:
            if placement.kind == PLACE_COLUMN and op == _INSERT and placement.table in inserts:
                consumed_insert[placement.table].append((action, placement, operand))
            elif (
                placement.kind == PLACE_COLUMN
                and op == ast.DOMSUB
                and placement.table in deletes
                and deletes[placement.table][1] == operand
            ):
                consumed_delete[placement.table].append(action)
            else:
                remaining.append((action, placement, op, operand))

        order = self.mapping.dependency_order()
        statements: List[_Statement] = []
        join_deletes: List[_Statement] = []
        join_inserts: List[_Statement] = []
        try:
            for table in order:
                if table in inserts:
                    statements.append(self._insert(table, *inserts[table], consumed_insert[table]))
            for action, placement, op, operand in remaining:
                self._label = action.label
                if placement.kind == PLACE_COLUMN:
                    statement = self._update(action, placement, op, operand)
                    if statement is not None:
                        statements.append(statement)
                else:
                    removed, added = self._join(action, placement, op, operand)
                    join_deletes.extend(removed)
                    join_inserts.extend(added)
            statements.extend(join_deletes)
            statements.extend(join_inserts)
            for table in reversed(order):
                if table in deletes:
                    statements.append(self._delete(table, *deletes[table], consumed_delete[table]))
        except Untranslatable as e:
            raise self._unsupported(self._label or "?", str(e)) from e
        self._check_order(statements)
        return statements

    def _check_order(self, statements: List[_Statement]) -> None:
        written = set()
        for statement in statements:
            clash = sorted(statement.reads & written)
            if clash:
                raise self._unsupported(
                    ", ".join(statement.labels),
                    f"reads {', '.join(clash)} after an earlier statement of the procedure changed it",
                )
            written |= statement.writes

    # --- class tables ----------------------------------------------------

    def _insert(self, table: str, action: ast.Action, added, columns) -> _Statement:
        self._label = action.label
        q = self.quote
        key = id_column(table)
        names = [q(key)] + [q(p.column) for _, p, _ in columns]
        element = _single(added)
        pairs = [_single_pair(operand) for _, _, operand in columns]
        if element is not None and all(pair is not None and pair.left == element for pair in pairs):
            values = [self._scalar(element)] + [self._scalar(pair.right) for pair in pairs]
            sql = f"INSERT INTO {q(table)} ({', '.join(names)}) VALUES ({', '.join(values)})"
        else:
            k = self.translator.alias()
            values = [f"{k}.v"]
            for _, _, operand in columns:
                a = self.translator.alias()
                values.append(f"(SELECT {a}.t FROM ({self._relation(operand)}) AS {a} WHERE {a}.s = {k}.v)")
            sql = (
                f"INSERT INTO {q(table)} ({', '.join(names)}) SELECT {', '.join(values)} "
                f"FROM ({self._set(added).select()}) AS {k}"
            )
        labels = (action.label,) + tuple(a.label for a, _, _ in columns)
        reads = self._reads(added, *(operand for _, _, operand in columns))
        writes = frozenset({table} | {p.variable for _, p, _ in columns})
        return _Statement(labels, sql, table, reads, writes)

    def _delete(self, table: str, action: ast.Action, removed, cascaded) -> _Statement:
        self._label = action.label
        q = self.quote
        if removed is None:
            sql = f"DELETE FROM {q(table)}"
        else:
            sql = f"DELETE FROM {q(table)} WHERE {self._set(removed).membership(q(id_column(table)))}"
        stored = {p.variable for p in self.mapping.columns_of(table)}
        labels = (action.label,) + tuple(a.label for a in cascaded)
        writes = frozenset({table} | stored | {a.target for a in cascaded})
        return _Statement(labels, sql, table, self._reads(removed), writes)

    # --- columns ---------------------------------------------------------

    def _update(self, action: ast.Action, placement: Placement, op: str, operand) -> Optional[_Statement]:
        q = self.quote
        table, column = q(placement.table), q(placement.column)
        key = q(placement.source_column)
        row = f"{table}.{key}"
        if op == _KEEP:
            return None
        if op in (_INSERT, _OVERRIDE):
            pair = _single_pair(operand)
            if pair is not None:
                sql = f"UPDATE {table} SET {column} = {self._scalar(pair.right)} WHERE {key} = {self._scalar(pair.left)}"
            else:
                a, b = self.translator.alias(), self.translator.alias()
                sql = (
                    f"UPDATE {table} SET {column} = (SELECT {a}.t FROM ({self._relation(operand)}) AS {a} WHERE {a}.s = {row}) "
                    f"WHERE {key} IN (SELECT {b}.s FROM ({self._relation(operand)}) AS {b})"
                )
        elif op in (ast.DOMSUB, ast.DOMRES):
            test = self._set(operand).membership(key)
            if op == ast.DOMRES:
                test = f"NOT ({test})"
            sql = f"UPDATE {table} SET {column} = NULL WHERE {test}"
        elif op == _DELETE:
            a = self.translator.alias()
            sql = (
                f"UPDATE {table} SET {column} = NULL WHERE EXISTS (SELECT 1 FROM ({self._relation(operand)}) AS {a} "
                f"WHERE {a}.s = {row} AND {a}.t = {table}.{column})"
            )
        elif op == _CLEAR:
            sql = f"UPDATE {table} SET {column} = NULL"
        else:
            if action.target in ast.free_names(operand):
                raise self._unsupported(action.label, f"cannot rewrite '{action.target}' from its own value")
            a = self.translator.alias()
            sql = f"UPDATE {table} SET {column} = (SELECT {a}.t FROM ({self._relation(operand)}) AS {a} WHERE {a}.s = {row})"
        return _Statement(
            (action.label,), sql, placement.table, self._reads(action.expression), frozenset({action.target})
        )

    # --- join tables -----------------------------------------------------

    def _join_insert(self, placement: Placement, added) -> str:
        q = self.quote
        table = q(placement.table)
        source, target = q(placement.source_column), q(placement.column)
        a, b = self.translator.alias(), self.translator.alias()
        return (
            f"INSERT INTO {table} ({source}, {target}) SELECT {a}.s, {a}.t FROM ({self._relation(added)}) AS {a} "
            f"WHERE NOT EXISTS (SELECT 1 FROM {table} AS {b} WHERE {b}.{source} = {a}.s AND {b}.{target} = {a}.t)"
        )

    def _join(self, action: ast.Action, placement: Placement, op: str, operand):
        q = self.quote
        table = q(placement.table)
        source, target = q(placement.source_column), q(placement.column)
        reads = self._reads(action.expression)
        writes = frozenset({action.target})
        labels = (action.label,)

        def statement(sql: str) -> _Statement:
            return _Statement(labels, sql, placement.table, reads, writes)

        if op == _KEEP:
            return [], []
        if op == _INSERT:
            return [], [statement(self._join_insert(placement, operand))]
        if op == _DELETE:
            pair = _single_pair(operand)
            if pair is not None:
                sql = (
                    f"DELETE FROM {table} WHERE {source} = {self._scalar(pair.left)} "
                    f"AND {target} = {self._scalar(pair.right)}"
                )
            else:
                a = self.translator.alias()
                sql = (
                    f"DELETE FROM {table} WHERE EXISTS (SELECT 1 FROM ({self._relation(operand)}) AS {a} "
                    f"WHERE {a}.s = {table}.{source} AND {a}.t = {table}.{target})"
                )
            return [statement(sql)], []
        if op in (ast.DOMSUB, ast.DOMRES):
            test = self._set(operand).membership(source)
            if op == ast.DOMRES:
                test = f"NOT ({test})"
            return [statement(f"DELETE FROM {table} WHERE {test}")], []
        if op == _CLEAR:
            return [statement(f"DELETE FROM {table}")], []
        if action.target in ast.free_names(operand):
            raise self._unsupported(action.label, f"cannot rewrite '{action.target}' from its own value")
        if op == _OVERRIDE:
            a = self.translator.alias()
            removed = f"DELETE FROM {table} WHERE {source} IN (SELECT {a}.s FROM ({self._relation(operand)}) AS {a})"
        else:
            removed = f"DELETE FROM {table}"
        return [statement(removed)], [statement(self._join_insert(placement, operand))]


# --- rendering -----------------------------------------------------------


def _signal(procedure: ProcedureDef, label: str) -> str:
    return f"SIGNAL SQLSTATE '45000' SET MESSAGE_TEXT = '{procedure.name}: {label}'"


def render_procedure(procedure: ProcedureDef) -> str:
    """
    ANSI-style routine text: a procedure with BEGIN ATOMIC for updating events,
    a read-only function for queries with one output.
    """
    lines = []
    params = [f"  IN {param_name(name)} {sql_type}" for name, sql_type in procedure.params]
    single = procedure.is_query and len(procedure.outputs) == 1
    routine = "FUNCTION" if single else "PROCEDURE"
    if params:
        lines.append(f"CREATE {routine} {procedure.name}(")
        lines.append(",\n".join(params))
        lines.append(")")
    else:
        lines.append(f"CREATE {routine} {procedure.name}()")
    if single:
        output = procedure.outputs[0]
        if output.is_set:
            lines.append(f"RETURNS TABLE ({output.name} {output.sql_type})")
        else:
            lines.append(f"RETURNS {output.sql_type}")
    if procedure.is_query:
        lines.append("READS SQL DATA")
        if not single and procedure.outputs:
            lines.append(f"DYNAMIC RESULT SETS {len(procedure.outputs)}")
    else:
        lines.append("MODIFIES SQL DATA")
    lines.append("BEGIN ATOMIC")
    if procedure.is_query and not single:
        for output in procedure.outputs:
            lines.append(f"  DECLARE c_{output.name} CURSOR WITH RETURN FOR {output.sql};")
    for check in procedure.guards:
        lines.append(f"  IF (CASE WHEN {check.condition} THEN 1 ELSE 0 END) = 0 THEN")
        lines.append(f"    {_signal(procedure, check.label)};")
        lines.append("  END IF;")
    for step in procedure.steps:
        lines.append(f"  -- {', '.join(step.labels)}")
        lines.append(f"  {step.sql};")
    if single:
        output = procedure.outputs[0]
        if output.is_set:
            lines.append(f"  RETURN TABLE ({output.sql});")
        else:
            lines.append(f"  RETURN ({output.sql});")
    elif procedure.is_query:
        for output in procedure.outputs:
            lines.append(f"  OPEN c_{output.name};")
    lines.append("END;")
    return strip_param_markers("\n".join(lines))


def build_procedures(mapping: RelationalMapping, quote: Callable[[str], str]) -> Tuple[ProcedureDef, ...]:
    """
    One procedure per event, in event order.

    Raises:
        UnsupportedGuardError: a guard outside the translatable fragment
        UnsupportedActionError: an action with no SQL counterpart
    """
    builder = ProcedureBuilder(mapping, quote)
    return tuple(builder.build(event) for event in mapping.machine.events)


def generate_procedures(machine: ResolvedMachine, dialect: str = "ansi") -> SqlScript:
    """
    Procedures for a flattened machine, in event order.

    The `sqlite` script has no statements: its procedures run through
    SqliteDatabase.
    """
    mapping, _ = schema_for(machine, dialect)
    procedures = build_procedures(mapping, quoter(get_dialect(dialect)))
    statements = tuple(p.body for p in procedures) if dialect == "ansi" else ()
    logger.info(f"generate_procedures: {machine.name} -> {len(procedures)} procedure(s) ({dialect})")
    return SqlScript(dialect=dialect, statements=statements, procedures=procedures)
