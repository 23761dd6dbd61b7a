"""
Running generated procedures on SQLite

SQLite has no stored procedures, so a procedure runs as one transaction:
guards first, then the data-modifying steps in order. Any failure rolls the
whole call back.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import re
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from sqlalchemy import create_engine, event, text
from sqlalchemy.exc import SQLAlchemyError

from ubdb.engine.values import Atom, State, Value
from ubdb.exceptions import GuardRejectedError, ProcedureError, ProcedureFailedError, UsageError
from ubdb.model.chain import ResolvedMachine
from ubdb.sqlgen.ddl import get_dialect, quoter, render_ddl, schema_for
from ubdb.sqlgen.flatten import flatten
from ubdb.sqlgen.procedures import ProcedureBuilder
from ubdb.sqlgen.schema import PLACE_CLASS, ProcedureDef, param_name, value_index, value_text
from ubdb.utils.logger import get_logger

logger = get_logger()

_BIND = re.compile(r":(p_\w+)")

FailureHook = Callable[[str, int], None]


class AtomCodec:
    """
    Atoms to stored values and back.

    Class atoms get surrogate ids in first-use order, shared by every table of
    the carrier; value atoms are stored as text (dates as ISO dates).
    """

    def __init__(self, machine: ResolvedMachine):
        self.class_carriers = frozenset(machine.class_carriers())
        self._ids: Dict[Atom, int] = {}
        self._atoms: Dict[Tuple[str, int], Atom] = {}

    def encode(self, value: Value):
        if not isinstance(value, Atom):
            raise UsageError(f"Only single atoms can be passed to a procedure, got {value!r}")
        if value.carrier in self.class_carriers:
            if value not in self._ids:
                row_id = len(self._ids) + 1
                self._ids[value] = row_id
                self._atoms[(value.carrier, row_id)] = value
            return self._ids[value]
        return value_text(value.carrier, value.index)

    def decode(self, carrier: str, raw) -> Atom:
        if carrier in self.class_carriers:
            atom = self._atoms.get((carrier, int(raw)))
            if atom is None:
                raise ProcedureError(f"Row id {raw} of {carrier} was not issued by this database")
            return atom
        return Atom(carrier, value_index(carrier, raw))

    def id_table(self) -> Dict[str, int]:
        return {str(atom): row_id for atom, row_id in sorted(self._ids.items(), key=lambda item: item[1])}


def _binds(sql: str, values: Mapping[str, object]) -> Dict[str, object]:
    return {name: values[name] for name in set(_BIND.findall(sql))}


class SqliteDatabase:
    """In-memory SQLite database created from a flattened machine"""

    def __init__(self, machine, failure_hook: Optional[FailureHook] = None):
        if not isinstance(machine, ResolvedMachine):
            machine = flatten(machine)
        self.machine = machine
        self.failure_hook = failure_hook
        self.mapping, self.notes = schema_for(machine, "sqlite")
        builder = ProcedureBuilder(self.mapping, quoter(get_dialect("sqlite")))
        self.procedures: Dict[str, ProcedureDef] = {}
        self._output_carriers: Dict[str, Dict[str, Optional[str]]] = {}
        for resolved in machine.events:
            self.procedures[resolved.name] = builder.build(resolved)
            typing = {p.name: p.typing for p in resolved.parameters}
            carriers = {}
            for output in self.procedures[resolved.name].outputs:
                declared = typing[output.name]
                if output.is_set:
                    declared = declared.operand
                carriers[output.name] = builder.element_carrier(declared)
            self._output_carriers[resolved.name] = carriers
        self.codec = AtomCodec(machine)

        self.engine = create_engine("sqlite://")

        @event.listens_for(self.engine, "connect")
        def _foreign_keys(dbapi_connection, connection_record):
            cursor = dbapi_connection.cursor()
            cursor.execute("PRAGMA foreign_keys=ON")
            cursor.close()

        with self.engine.begin() as connection:
            for statement in render_ddl(self.mapping, "sqlite"):
                connection.exec_driver_sql(statement)
        logger.debug(f"sqlite: created {len(self.mapping.tables)} table(s) for {machine.name}")

    def close(self) -> None:
        self.engine.dispose()

    def __enter__(self) -> "SqliteDatabase":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def call(self, name: str, args: Mapping[str, object]) -> Optional[Dict[str, List]]:
        """
        Run one procedure with raw (already encoded) arguments.

        Returns:
            {output: [raw values]} for queries, None otherwise

        Raises:
            GuardRejectedError: a guard is false; nothing was modified
            ProcedureFailedError: a step failed; the call was rolled back
        """
        procedure = self.procedures.get(name)
        if procedure is None:
            raise UsageError(f"Unknown procedure '{name}'", suggestions=[f"Procedures: {', '.join(self.procedures)}"])
        missing = [n for n in procedure.input_names if n not in args]
        if missing:
            raise UsageError(f"Procedure '{name}' needs {', '.join(missing)}")
        values = {param_name(n): args[n] for n in procedure.input_names}
        outputs = None
        try:
            with self.engine.begin() as connection:
                for check in procedure.guards:
                    sql = f"SELECT CASE WHEN {check.condition} THEN 1 ELSE 0 END"
                    if connection.execute(text(sql), _binds(sql, values)).scalar() != 1:
                        raise GuardRejectedError(
                            f"{name}: guard {check.label} is false", procedure=name, label=check.label
                        )
                for index, step in enumerate(procedure.steps):
                    if self.failure_hook is not None:
                        self.failure_hook(name, index)
                    connection.execute(text(step.sql), _binds(step.sql, values))
                if procedure.is_query:
                    outputs = {}
                    for output in procedure.outputs:
                        rows = connection.execute(text(output.sql), _binds(output.sql, values))
                        outputs[output.name] = [row[0] for row in rows]
        except ProcedureError:
            raise
        except SQLAlchemyError as e:
            raise ProcedureFailedError(f"{name}: {e.__class__.__name__}: {e}", procedure=name) from e
        except Exception as e:
            raise ProcedureFailedError(f"{name}: interrupted: {e}", procedure=name) from e
        return outputs

    def execute_event(self, event_name: str, binding: Mapping[str, Value]) -> Optional[Dict[str, Value]]:
        """
        Run the procedure of an event with a binding of model values.

        Query outputs are decoded back to atoms: a frozenset for set-valued
        outputs, a single atom (or None when undefined) otherwise.
        """
        procedure = self.procedures.get(event_name)
        if procedure is None:
            raise UsageError(f"Unknown event '{event_name}'")
        args = {n: self.codec.encode(binding[n]) for n in procedure.input_names if n in binding}
        raw = self.call(event_name, args)
        if raw is None:
            return None
        decoded: Dict[str, Value] = {}
        carriers = self._output_carriers[event_name]
        for output in procedure.outputs:
            carrier = carriers[output.name]
            items = [self.codec.decode(carrier, v) for v in raw[output.name] if v is not None]
            if output.is_set:
                decoded[output.name] = frozenset(items)
            else:
                decoded[output.name] = items[0] if items else None
        return decoded


def state_from_database(db: SqliteDatabase) -> State:
    """Read every model variable back from the tables"""
    quote = quoter(get_dialect("sqlite"))
    values = []
    with db.engine.connect() as connection:
        for name in db.machine.variable_names:
            placement = db.mapping.placement(name)
            if placement.kind == PLACE_CLASS:
                rows = connection.exec_driver_sql(f"SELECT {quote(placement.column)} FROM {quote(placement.table)}")
                values.append(frozenset(db.codec.decode(placement.source_carrier, row[0]) for row in rows))
                continue
            rows = connection.exec_driver_sql(
                f"SELECT {quote(placement.source_column)}, {quote(placement.column)} FROM {quote(placement.table)} "
                f"WHERE {quote(placement.column)} IS NOT NULL"
            )
            values.append(
                frozenset(
                    (
                        db.codec.decode(placement.source_carrier, row[0]),
                        db.codec.decode(placement.target_carrier, row[1]),
                    )
                    for row in rows
                )
            )
    return State(db.machine.variable_names, tuple(values))
