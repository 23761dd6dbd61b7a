"""
Finite-model set engine: values, evaluation and event execution

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from ubdb.engine.evaluator import Evaluator, evaluate, evaluate_predicate, satisfies_function_class
from ubdb.engine.events import (
    CompiledEvent,
    EventEngine,
    apply_event,
    enumerate_bindings,
    is_enabled,
    replay,
    scope_exhausted,
)
from ubdb.engine.values import (
    EMPTY,
    Atom,
    Scope,
    State,
    Value,
    format_value,
    sorted_values,
    value_key,
)
from ubdb.parser import parse_expression


def parse_value(text: str, scope: Scope = None) -> Value:
    """Read a value written in expression syntax (atoms, maplets, enumerated sets)"""
    return Evaluator(scope or Scope()).evaluate(parse_expression(text))


__all__ = [
    "EMPTY",
    "Atom",
    "CompiledEvent",
    "EventEngine",
    "Evaluator",
    "Scope",
    "State",
    "Value",
    "apply_event",
    "enumerate_bindings",
    "evaluate",
    "evaluate_predicate",
    "format_value",
    "is_enabled",
    "parse_value",
    "replay",
    "satisfies_function_class",
    "scope_exhausted",
    "sorted_values",
    "value_key",
]
