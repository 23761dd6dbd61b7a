"""
DDL rendering

Tables are built as SQLAlchemy schema objects and compiled for the target
dialect. The `ansi` rendering creates tables in dependency order and closes
foreign-key cycles with ALTER TABLE; the `sqlite` rendering keeps every
foreign key inline and deferred.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Callable, Dict, List, Set, Tuple

from sqlalchemy import (
    CheckConstraint,
    Column,
    Date,
    ForeignKeyConstraint,
    Identity,
    Integer,
    MetaData,
    String,
    Table,
    UniqueConstraint,
)
from sqlalchemy.dialects import sqlite
from sqlalchemy.engine.default import DefaultDialect
from sqlalchemy.schema import AddConstraint, CreateTable

from ubdb.config import SQL_DIALECTS
from ubdb.exceptions import UsageError
from ubdb.model.chain import ResolvedMachine
from ubdb.sqlgen.mapping import RelationalMapping
from ubdb.sqlgen.schema import DATE_TYPE, ID_TYPE, TABLE_JOIN, TEXT_TYPE, TableDef
from ubdb.sqlgen.script import ManifestNote, SqlScript
from ubdb.sqlgen.translate import row_check
from ubdb.utils.logger import get_logger

logger = get_logger()

ENFORCED_BY_CHECK = "check constraint"
ENFORCED_BY_UNIQUE = "unique constraint"
ENFORCED_BY_GUARDS = "procedure guards"


class AnsiDialect(DefaultDialect):
    """Generic SQL with identity columns and ALTER TABLE"""

    name = "ansi"
    supports_identity_columns = True
    supports_alter = True


def get_dialect(name: str):
    if name == "ansi":
        return AnsiDialect()
    if name == "sqlite":
        return sqlite.dialect()
    raise UsageError(
        f"Unknown SQL dialect '{name}'",
        suggestions=[f"Dialects: {', '.join(SQL_DIALECTS)}"],
    )


def quoter(dialect) -> Callable[[str], str]:
    """Identifier quoting that matches the dialect's DDL"""
    return dialect.identifier_preparer.quote


def _sa_type(sql_type: str):
    if sql_type == ID_TYPE:
        return Integer()
    if sql_type == DATE_TYPE:
        return Date()
    if sql_type == TEXT_TYPE:
        return String(255)
    raise ValueError(f"no column type for {sql_type}")


def _forward_keys(mapping: RelationalMapping, order: Tuple[str, ...]) -> Set[str]:
    """Constraint names of foreign keys that point at a table created later"""
    position = {name: i for i, name in enumerate(order)}
    forward = set()
    for table in mapping.tables:
        for fk in table.foreign_keys:
            if position[fk.table] > position[table.name]:
                forward.add(fk.constraint_name(table.name))
    return forward


def build_metadata(mapping: RelationalMapping, dialect_name: str) -> MetaData:
    metadata = MetaData()
    deferred = {"deferrable": True, "initially": "DEFERRED"} if dialect_name == "sqlite" else {}
    for table in mapping.tables:
        columns = []
        for column in table.columns:
            args = []
            generated = column.primary_key and table.kind == TABLE_JOIN
            if generated and dialect_name == "ansi":
                args.append(Identity())
            columns.append(
                Column(
                    column.name,
                    _sa_type(column.sql_type),
                    *args,
                    primary_key=column.primary_key,
                    nullable=column.nullable,
                    autoincrement=generated,
                )
            )
        constraints = []
        for column in table.columns:
            if column.unique and not column.primary_key:
                constraints.append(UniqueConstraint(column.name, name=f"uq_{table.name}_{column.name}"))
        for group in table.unique_constraints:
            constraints.append(UniqueConstraint(*group, name=f"uq_{table.name}_{'_'.join(group)}"))
        for fk in table.foreign_keys:
            constraints.append(
                ForeignKeyConstraint(
                    [fk.column],
                    [f"{fk.table}.{fk.referenced_column}"],
                    name=fk.constraint_name(table.name),
                    **deferred,
                )
            )
        for index, check in enumerate(table.checks, 1):
            constraints.append(CheckConstraint(check, name=f"ck_{table.name}_{index}"))
        Table(table.name, metadata, *columns, *constraints)
    return metadata


def _tidy(compiled) -> str:
    lines = [line.rstrip().replace("\t", "  ") for line in str(compiled).strip().splitlines()]
    return "\n".join(lines) + ";"


def render_ddl(mapping: RelationalMapping, dialect_name: str) -> List[str]:
    """CREATE TABLE statements (plus ALTER TABLE for ansi cycles) in dependency order"""
    dialect = get_dialect(dialect_name)
    metadata = build_metadata(mapping, dialect_name)
    order = mapping.dependency_order()
    forward = _forward_keys(mapping, order) if dialect_name == "ansi" else set()
    statements = []
    deferred = []
    for name in order:
        table = metadata.tables[name]
        inline = [fkc for fkc in table.foreign_key_constraints if fkc.name not in forward]
        inline.sort(key=lambda fkc: fkc.name)
        statements.append(_tidy(CreateTable(table, include_foreign_key_constraints=inline).compile(dialect=dialect)))
        deferred.extend(sorted((fkc for fkc in table.foreign_key_constraints if fkc.name in forward), key=lambda f: f.name))
    for constraint in deferred:
        statements.append(_tidy(AddConstraint(constraint).compile(dialect=dialect)))
    return statements


def invariant_notes(mapping: RelationalMapping, checks: Dict[str, List[str]]) -> List[ManifestNote]:
    """How each declared invariant is enforced by the database"""
    notes = []
    checked = {label for labels in checks.values() for label in labels}
    for invariant in mapping.machine.declared_invariants:
        if invariant.label in mapping.composite:
            table, group = mapping.composite[invariant.label]
            notes.append(
                ManifestNote(
                    element=invariant.label,
                    enforcement=ENFORCED_BY_UNIQUE,
                    detail=f"UNIQUE ({', '.join(group)}) on {table}",
                )
            )
        elif invariant.label in checked:
            table = next(t for t, labels in checks.items() if invariant.label in labels)
            notes.append(
                ManifestNote(element=invariant.label, enforcement=ENFORCED_BY_CHECK, detail=f"CHECK on {table}")
            )
        else:
            notes.append(
                ManifestNote(
                    element=invariant.label,
                    enforcement=ENFORCED_BY_GUARDS,
                    detail="not expressible as a column or table constraint",
                )
            )
    return notes


def schema_for(machine: ResolvedMachine, dialect_name: str) -> Tuple[RelationalMapping, List[ManifestNote]]:
    """Mapping with single-row invariants attached as CHECK constraints"""
    quote = quoter(get_dialect(dialect_name))
    mapping = RelationalMapping(machine)
    checks: Dict[str, List[str]] = {}
    labels: Dict[str, List[str]] = {}
    for invariant in machine.declared_invariants:
        if invariant.label in mapping.composite:
            continue
        found = row_check(invariant, mapping, quote)
        if found is not None:
            table, text = found
            checks.setdefault(table, []).append(text)
            labels.setdefault(table, []).append(invariant.label)
    mapping.with_checks(checks)
    return mapping, invariant_notes(mapping, labels)


def generate_ddl(machine: ResolvedMachine, dialect: str = "ansi") -> SqlScript:
    """
    Tables for a flattened machine.

    One table per class with PK `<class>_id` (a subclass PK is also a foreign
    key to its superclass); attribute columns are NOT NULL when total and
    UNIQUE when injective; function associations become FK columns
    `<assoc>_id`; relations become join tables with a composite UNIQUE.

    Raises:
        UnannotatedClassError: a class has no kind annotation
    """
    mapping, notes = schema_for(machine, dialect)
    statements = render_ddl(mapping, dialect)
    logger.info(f"generate_ddl: {machine.name} -> {len(mapping.tables)} table(s) ({dialect})")
    return SqlScript(
        dialect=dialect,
        statements=tuple(statements),
        tables=mapping.tables,
        notes=tuple(notes),
    )


def describe_table(table: TableDef) -> str:
    """One-line summary used by the MCP tool"""
    columns = ", ".join(
        f"{c.name}{'' if c.nullable else ' NOT NULL'}{' UNIQUE' if c.unique and not c.primary_key else ''}"
        for c in table.columns
    )
    return f"{table.name}({columns})"
