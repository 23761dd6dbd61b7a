"""
SQL generation entry point: schema plus procedures plus manifest

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Dict, Mapping, Optional

from ubdb.config import get_sql_dialect
from ubdb.model.chain import ResolvedMachine
from ubdb.model.resolve import resolve
from ubdb.sqlgen.ddl import get_dialect, quoter, render_ddl, schema_for
from ubdb.sqlgen.flatten import flatten
from ubdb.sqlgen.mapping import RelationalMapping
from ubdb.sqlgen.procedures import build_procedures
from ubdb.sqlgen.schema import DATE_TYPE, PLACE_CLASS, value_sql_type
from ubdb.sqlgen.script import Manifest, SqlScript
from ubdb.utils.logger import get_logger

logger = get_logger()

ATOM_IDS_SURROGATE = "surrogate integer ids in insertion order"
ATOM_IDS_TEXT = "text 'CARRIER.n'"
ATOM_IDS_DATE = "ISO date, element 1 is 2000-01-01"


def atom_id_policy(machine: ResolvedMachine) -> Dict[str, str]:
    """How each carrier's atoms are stored"""
    classes = set(machine.class_carriers())
    policy = {}
    for carrier in machine.carriers:
        if carrier in classes:
            policy[carrier] = ATOM_IDS_SURROGATE
        elif value_sql_type(carrier) == DATE_TYPE:
            policy[carrier] = ATOM_IDS_DATE
        else:
            policy[carrier] = ATOM_IDS_TEXT
    return policy


def _element_names(mapping: RelationalMapping):
    tables, columns = {}, {}
    for variable in sorted(mapping.placements):
        placement = mapping.placements[variable]
        if placement.kind == PLACE_CLASS:
            tables[variable] = placement.table
        else:
            columns[variable] = f"{placement.table}.{placement.column}"
            if placement.table == variable:
                tables[variable] = placement.table
    return tables, columns


def generate_sql(
    chain,
    dialect: Optional[str] = None,
    machine: Optional[str] = None,
    scope: Optional[Mapping[str, int]] = None,
    verified: bool = False,
    forced: bool = False,
) -> SqlScript:
    """
    Tables and procedures for the flattened machine of a chain.

    The `sqlite` rendering carries the procedures as data only (SQLite has no
    stored procedures); they run through SqliteDatabase.

    Args:
        chain: RefinementChain or ResolvedChain
        dialect: `ansi` or `sqlite` (default from UBDB_SQL_DIALECT)
        machine: machine to generate from instead of the most concrete one
        scope: checking scope recorded in the manifest
        verified: the model was checked before generation
        forced: generation went ahead despite failed obligations

    Raises:
        UnannotatedClassError, UnsupportedGuardError, UnsupportedActionError
    """
    dialect_name = get_sql_dialect(dialect)
    resolved = resolve(chain)
    target = flatten(resolved, machine)
    lineage = [m.name for m in resolved.machines]
    mapping, notes = schema_for(target, dialect_name)
    statements = list(render_ddl(mapping, dialect_name))
    procedures = build_procedures(mapping, quoter(get_dialect(dialect_name)))
    if dialect_name == "ansi":
        statements.extend(p.body for p in procedures)

    tables, columns = _element_names(mapping)
    manifest = Manifest(
        dialect=dialect_name,
        machine=target.name,
        chain=lineage[: lineage.index(target.name) + 1],
        verified=verified,
        forced=forced,
        scope=dict(sorted((scope or {}).items())),
        tables=tables,
        columns=columns,
        procedures={p.name: p.name for p in procedures},
        atom_ids=atom_id_policy(target),
        notes=list(notes),
    )
    logger.info(
        f"generate_sql: {target.name} -> {len(mapping.tables)} table(s), "
        f"{len(procedures)} procedure(s) ({dialect_name})"
    )
    return SqlScript(
        dialect=dialect_name,
        statements=tuple(statements),
        tables=mapping.tables,
        procedures=procedures,
        notes=tuple(notes),
        manifest=manifest,
        machine=target.name,
    )

