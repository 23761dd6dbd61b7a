"""
Class diagram to relational schema

One table per class with a synthetic `<class>_id` key; a subclass key is also a
foreign key to its superclass. Functions become columns on the source table,
relations become join tables.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Dict, List, Optional, Tuple

from ubdb.exceptions import SqlGenError, UnannotatedClassError
from ubdb.model import ast
from ubdb.model.chain import ResolvedMachine
from ubdb.sqlgen.schema import (
    ID_TYPE,
    JOIN_ROW_ID,
    PLACE_CLASS,
    PLACE_COLUMN,
    PLACE_JOIN,
    TABLE_JOIN,
    ColumnDef,
    ForeignKey,
    Placement,
    TableDef,
    id_column,
    value_sql_type,
)
from ubdb.utils.logger import get_logger

logger = get_logger()


def _id(class_name: str) -> ColumnDef:
    return ColumnDef(id_column(class_name), ID_TYPE, nullable=False, unique=True, primary_key=True)


def composite_keys(machine: ResolvedMachine) -> Dict[str, Tuple[str, ...]]:
    """
    Invariants stating that a combination of functions identifies an instance.

    Recognises `!... . (c1|->a : F & c2|->a : F & c1|->b : G & c2|->b : G) => c1 = c2`
    and returns {label: (F, G, ...)} in first-use order.
    """
    result = {}
    for invariant in machine.declared_invariants:
        functions = _uniqueness_functions(invariant.predicate)
        if functions and len(functions) >= 2:
            result[invariant.label] = functions
    return result


def _uniqueness_functions(pred) -> Optional[Tuple[str, ...]]:
    if not isinstance(pred, ast.Quantifier) or pred.kind != ast.FORALL:
        return None
    body = pred.body
    if not isinstance(body, ast.BinaryPred) or body.op != ast.IMPLIES:
        return None
    consequent = body.right
    if not (
        isinstance(consequent, ast.Relational)
        and consequent.op == ast.EQUAL
        and isinstance(consequent.left, ast.Name)
        and isinstance(consequent.right, ast.Name)
    ):
        return None
    instances = {consequent.left.name, consequent.right.name}
    functions: List[str] = []
    for part in ast.conjuncts(body.left):
        if not (
            isinstance(part, ast.Relational)
            and part.op == ast.MEMBER
            and isinstance(part.left, ast.Maplet)
            and isinstance(part.left.left, ast.Name)
            and part.left.left.name in instances
            and isinstance(part.right, ast.Name)
        ):
            return None
        if part.right.name not in functions:
            functions.append(part.right.name)
    return tuple(functions)


class RelationalMapping:
    """Tables of a flattened machine and the placement of every variable"""

    def __init__(self, machine: ResolvedMachine):
        self.machine = machine
        self.placements: Dict[str, Placement] = {}
        self._columns: Dict[str, List[ColumnDef]] = {}
        self._foreign_keys: Dict[str, List[ForeignKey]] = {}
        self._unique: Dict[str, List[Tuple[str, ...]]] = {}
        self._join_tables: List[TableDef] = []
        self.composite: Dict[str, Tuple[str, Tuple[str, ...]]] = {}
        self._build()
        self.tables: Tuple[TableDef, ...] = self._finish()
        self._by_name = {t.name: t for t in self.tables}

    # --- construction ----------------------------------------------------

    def _build(self) -> None:
        machine = self.machine
        for name in machine.class_names:
            annotation = machine.annotation(name)
            if annotation is None:
                raise UnannotatedClassError(f"Class '{name}' has no kind annotation", class_name=name)
            self._columns[name] = [_id(name)]
            self._foreign_keys[name] = []
            self._unique[name] = []
            if annotation.supertype:
                self._foreign_keys[name].append(
                    ForeignKey(id_column(name), annotation.supertype, id_column(annotation.supertype))
                )
            self.placements[name] = Placement(
                name, PLACE_CLASS, name, column=id_column(name), source_carrier=machine.carrier_of(name)
            )
        for decl in machine.relations:
            self._place_relation(decl)
        for label, functions in composite_keys(machine).items():
            self._add_composite(label, functions)

    def _place_relation(self, decl: ast.VariableDecl) -> None:
        machine = self.machine
        typing = decl.typing
        if typing.source not in self._columns:
            raise SqlGenError(
                f"'{decl.name}' has source '{typing.source}', which is not a class",
                details={"variable": decl.name},
            )
        target_class = typing.target if typing.target in self._columns else None
        target_carrier = machine.carrier_of(typing.target)
        if target_carrier is None:
            raise SqlGenError(
                f"'{decl.name}' has target '{typing.target}', which is neither a class nor a carrier set",
                details={"variable": decl.name},
            )
        source_carrier = machine.carrier_of(typing.source)
        if typing.kind.is_function:
            column = f"{decl.name}_id" if target_class else decl.name
            sql_type = ID_TYPE if target_class else value_sql_type(target_carrier)
            self._columns[typing.source].append(
                ColumnDef(
                    column,
                    sql_type,
                    nullable=not typing.kind.is_total,
                    unique=typing.kind.injective,
                    source=decl.name,
                )
            )
            if target_class:
                self._foreign_keys[typing.source].append(ForeignKey(column, target_class, id_column(target_class)))
            self.placements[decl.name] = Placement(
                decl.name,
                PLACE_COLUMN,
                typing.source,
                column=column,
                source_column=id_column(typing.source),
                source_carrier=source_carrier,
                target_carrier=target_carrier,
                target_class=target_class,
            )
            return
        source_column = id_column(typing.source)
        if target_class is None:
            target_column = decl.name
            target_type = value_sql_type(target_carrier)
        elif target_class == typing.source:
            target_column = f"{decl.name}_id"
            target_type = ID_TYPE
        else:
            target_column = id_column(target_class)
            target_type = ID_TYPE
        foreign_keys = [ForeignKey(source_column, typing.source, id_column(typing.source))]
        if target_class:
            foreign_keys.append(ForeignKey(target_column, target_class, id_column(target_class)))
        self._join_tables.append(
            TableDef(
                name=decl.name,
                columns=(
                    ColumnDef(JOIN_ROW_ID, ID_TYPE, nullable=False, unique=True, primary_key=True),
                    ColumnDef(source_column, ID_TYPE, nullable=False),
                    ColumnDef(target_column, target_type, nullable=False, source=decl.name),
                ),
                primary_key=JOIN_ROW_ID,
                foreign_keys=tuple(foreign_keys),
                unique_constraints=((source_column, target_column),),
                kind=TABLE_JOIN,
                source=decl.name,
            )
        )
        self.placements[decl.name] = Placement(
            decl.name,
            PLACE_JOIN,
            decl.name,
            column=target_column,
            source_column=source_column,
            source_carrier=source_carrier,
            target_carrier=target_carrier,
            target_class=target_class,
        )

    def _add_composite(self, label: str, functions: Tuple[str, ...]) -> None:
        places = [self.placements.get(f) for f in functions]
        if any(p is None or p.kind != PLACE_COLUMN for p in places):
            logger.debug(f"composite key {label}: not all of {functions} are columns")
            return
        tables = {p.table for p in places}
        if len(tables) != 1:
            logger.debug(f"composite key {label}: columns span {sorted(tables)}")
            return
        table = tables.pop()
        group = tuple(p.column for p in places)
        if group not in self._unique[table]:
            self._unique[table].append(group)
            self.composite[label] = (table, group)

    def _finish(self) -> Tuple[TableDef, ...]:
        tables = []
        for name in self.machine.class_names:
            tables.append(
                TableDef(
                    name=name,
                    columns=tuple(self._columns[name]),
                    primary_key=id_column(name),
                    foreign_keys=tuple(self._foreign_keys[name]),
                    unique_constraints=tuple(self._unique[name]),
                    source=name,
                )
            )
        return tuple(tables) + tuple(self._join_tables)

    # --- lookups ---------------------------------------------------------

    def table(self, name: str) -> TableDef:
        return self._by_name[name]

    def placement(self, variable: str) -> Optional[Placement]:
        return self.placements.get(variable)

    def is_class(self, name: str) -> bool:
        placement = self.placements.get(name)
        return placement is not None and placement.kind == PLACE_CLASS

    def columns_of(self, class_name: str) -> List[Placement]:
        """Function placements stored on a class table"""
        return [p for p in self.placements.values() if p.kind == PLACE_COLUMN and p.table == class_name]

    def with_checks(self, checks: Dict[str, List[str]]) -> "RelationalMapping":
        """Attach CHECK constraint text per table"""
        self.tables = tuple(
            TableDef(
                name=t.name,
                columns=t.columns,
                primary_key=t.primary_key,
                foreign_keys=t.foreign_keys,
                unique_constraints=t.unique_constraints,
                checks=t.checks + tuple(checks.get(t.name, ())),
                kind=t.kind,
                source=t.source,
            )
            for t in self.tables
        )
        self._by_name = {t.name: t for t in self.tables}
        return self

    def dependency_order(self) -> Tuple[str, ...]:
        """
        Table names with referenced tables first. A cycle is broken at its first
        table in declaration order.
        """
        names = [t.name for t in self.tables]
        pending = {
            t.name: {ref for ref in t.referenced_tables if ref != t.name} for t in self.tables
        }
        order: List[str] = []
        while pending:
            ready = [n for n in names if n in pending and not (pending[n] & set(pending))]
            if not ready:
                ready = [next(n for n in names if n in pending)]
            for name in ready:
                order.append(name)
                del pending[name]
        return tuple(order)
