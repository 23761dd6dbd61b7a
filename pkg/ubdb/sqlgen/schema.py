"""
Relational schema and procedure definitions

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional, Tuple

# Where a model variable lives in the schema
PLACE_CLASS = "class"
PLACE_COLUMN = "column"
PLACE_JOIN = "join"

TABLE_CLASS = "class"
TABLE_JOIN = "join"

ID_TYPE = "INTEGER"
TEXT_TYPE = "VARCHAR(255)"
DATE_TYPE = "DATE"

JOIN_ROW_ID = "row_id"

PARAM_PREFIX = "p_"
_PARAM_REF = re.compile(r":(p_\w+)")


def id_column(class_name: str) -> str:
    return f"{class_name}_id"


def param_name(parameter: str) -> str:
    return f"{PARAM_PREFIX}{parameter}"


def param_ref(parameter: str) -> str:
    """Named placeholder for an event parameter inside step SQL"""
    return f":{param_name(parameter)}"


def strip_param_markers(sql: str) -> str:
    """`:p_x` placeholders become plain `p_x` routine parameters"""
    return _PARAM_REF.sub(r"\1", sql)


def value_sql_type(carrier: str) -> str:
    """Column type for a value carrier set: DATE-named sets are dates, the rest text"""
    return DATE_TYPE if "DATE" in carrier.upper() else TEXT_TYPE


@dataclass(frozen=True)
class ColumnDef:
    name: str
    sql_type: str
    nullable: bool = True
    unique: bool = False
    primary_key: bool = False
    # model variable stored in the column (None for ids)
    source: Optional[str] = None


@dataclass(frozen=True)
class ForeignKey:
    column: str
    table: str
    referenced_column: str

    def constraint_name(self, owner: str) -> str:
        return f"fk_{owner}_{self.column}"


@dataclass(frozen=True)
class TableDef:
    """
    One table per class (class-table inheritance) or per unsplit relation.

    The primary key is always a single synthetic id column.
    """

    name: str
    columns: Tuple[ColumnDef, ...]
    primary_key: str
    foreign_keys: Tuple[ForeignKey, ...] = ()
    unique_constraints: Tuple[Tuple[str, ...], ...] = ()
    checks: Tuple[str, ...] = ()
    kind: str = TABLE_CLASS
    source: Optional[str] = None

    def __post_init__(self):
        keys = [c.name for c in self.columns if c.primary_key]
        if keys != [self.primary_key]:
            raise ValueError(f"table {self.name} must have exactly one primary key column {self.primary_key}")
        names = {c.name for c in self.columns}
        for fk in self.foreign_keys:
            if fk.column not in names:
                raise ValueError(f"table {self.name}: foreign key on unknown column {fk.column}")
        for group in self.unique_constraints:
            missing = [c for c in group if c not in names]
            if missing:
                raise ValueError(f"table {self.name}: unique constraint on unknown column(s) {missing}")

    def column(self, name: str) -> Optional[ColumnDef]:
        for column in self.columns:
            if column.name == name:
                return column
        return None

    @property
    def referenced_tables(self) -> Tuple[str, ...]:
        return tuple(fk.table for fk in self.foreign_keys)


@dataclass(frozen=True)
class Placement:
    """Schema location of a model variable"""

    variable: str
    kind: str
    table: str
    # column holding the target value (PLACE_COLUMN) or the relation's two ends (PLACE_JOIN)
    column: Optional[str] = None
    source_column: Optional[str] = None
    source_carrier: Optional[str] = None
    target_carrier: Optional[str] = None
    target_class: Optional[str] = None


@dataclass(frozen=True)
class GuardCheck:
    label: str
    condition: str


@dataclass(frozen=True)
class DmlStep:
    labels: Tuple[str, ...]
    sql: str
    table: str


@dataclass(frozen=True)
class QueryOutput:
    name: str
    sql: str
    sql_type: str
    # set-valued outputs return every row, scalar outputs a single value
    is_set: bool = True


@dataclass(frozen=True)
class ProcedureDef:
    """
    Stored procedure (or read-only function for queries) implementing one event.

    Guard checks always run before any step; query procedures have no steps.
    """

    name: str
    kind: str
    params: Tuple[Tuple[str, str], ...]
    guards: Tuple[GuardCheck, ...] = ()
    steps: Tuple[DmlStep, ...] = ()
    outputs: Tuple[QueryOutput, ...] = ()
    body: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind == "query" and self.steps:
            raise ValueError(f"query procedure {self.name} must not modify data")

    @property
    def is_query(self) -> bool:
        return self.kind == "query"

    @property
    def input_names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.params)


# Value atoms are stored as text; DATE carriers as ISO dates counted from DATE_EPOCH
DATE_EPOCH = date(2000, 1, 1)


def value_text(carrier: str, index: int) -> str:
    if value_sql_type(carrier) == DATE_TYPE:
        return (DATE_EPOCH + timedelta(days=index - 1)).isoformat()
    return f"{carrier}.{index}"


def value_index(carrier: str, text: str) -> int:
    """Inverse of value_text"""
    if value_sql_type(carrier) == DATE_TYPE:
        return (date.fromisoformat(str(text)) - DATE_EPOCH).days + 1
    prefix = f"{carrier}."
    if not str(text).startswith(prefix):
        raise ValueError(f"{text!r} is not an element of {carrier}")
    return int(str(text)[len(prefix):])


def sql_literal(text: str) -> str:
    return "'" + str(text).replace("'", "''") + "'"
