"""
Relational code generation: tables, procedures and a SQLite runtime

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from ubdb.sqlgen.ddl import describe_table, generate_ddl
from ubdb.sqlgen.flatten import flatten
from ubdb.sqlgen.generator import generate_sql
from ubdb.sqlgen.mapping import RelationalMapping
from ubdb.sqlgen.procedures import build_procedures, generate_procedures, render_procedure
from ubdb.sqlgen.runtime import AtomCodec, SqliteDatabase, state_from_database
from ubdb.sqlgen.schema import ColumnDef, ProcedureDef, TableDef
from ubdb.sqlgen.script import Manifest, ManifestNote, SqlScript, emit

__all__ = [
    "AtomCodec",
    "ColumnDef",
    "Manifest",
    "ManifestNote",
    "ProcedureDef",
    "RelationalMapping",
    "SqlScript",
    "SqliteDatabase",
    "TableDef",
    "build_procedures",
    "describe_table",
    "emit",
    "flatten",
    "generate_ddl",
    "generate_procedures",
    "generate_sql",
    "render_procedure",
    "state_from_database",
]
