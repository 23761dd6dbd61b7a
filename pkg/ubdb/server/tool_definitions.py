"""
Tool Definitions for MCP Server

Contains all Tool schema definitions for the MCP server.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Any, Dict, List

from mcp.types import Tool

_MODEL_PROPERTIES: Dict[str, Any] = {
    "model": {
        "type": "string",
        "description": "Name of a bundled model (e.g. 'sres', 'relation'); see list_models",
    },
    "source": {
        "type": "string",
        "description": "Model text in the .ubdb language (contexts and machines)",
    },
}

_SCOPE_PROPERTY: Dict[str, Any] = {
    "type": "object",
    "description": "Instance bound per carrier set, e.g. {\"PERSON\": 2, \"CODE\": 2}. "
    "Defaults: 2 for sets typing a class, 3 for value sets",
    "additionalProperties": {"type": "integer", "minimum": 0},
}

_BUDGET_PROPERTY: Dict[str, Any] = {
    "type": "integer",
    "description": "Maximum number of states explored per machine (default: UBDB_BUDGET or 1000000)",
    "minimum": 1,
}

_MACHINE_PROPERTY: Dict[str, Any] = {
    "type": "string",
    "description": "Machine name (default: every machine, or the most concrete one)",
}


def _schema(**extra: Dict[str, Any]) -> Dict[str, Any]:
    return {"type": "object", "properties": {**_MODEL_PROPERTIES, **extra}, "required": []}


def get_all_tools() -> List[Tool]:
    """Get all tool definitions for the MCP server"""
    return [
        Tool(
            name="list_models",
            description="List the bundled example models and their machines.",
            inputSchema={"type": "object", "properties": {}, "required": []},
        ),
        Tool(
            name="check_model",
            description=(
                "Check invariant preservation (INV) and event feasibility (FEAS) of every machine "
                "by exhaustive exploration of all reachable states within a small scope. "
                "Violations come with a counterexample trace from the empty state."
            ),
            inputSchema=_schema(scope=_SCOPE_PROPERTY, budget=_BUDGET_PROPERTY, machine=_MACHINE_PROPERTY),
        ),
        Tool(
            name="refine_check_model",
            description=(
                "Check each refinement step: guard strengthening (GRD), simulation (SIM) and "
                "gluing invariants (GLU), by joint exploration of abstract and concrete machines."
            ),
            inputSchema=_schema(
                scope=_SCOPE_PROPERTY,
                budget=_BUDGET_PROPERTY,
                machine={"type": "string", "description": "Only the step ending at this machine"},
            ),
        ),
        Tool(
            name="lint_model",
            description=(
                "Check class kinds (primary, secondary, attribute, historical), the layering "
                "discipline and the historical-data pattern."
            ),
            inputSchema=_schema(
                strict={
                    "type": "boolean",
                    "description": "Treat warnings as errors (default: false)",
                    "default": False,
                }
            ),
        ),
        Tool(
            name="generate_sql",
            description=(
                "Generate SQL tables and stored procedures from the most concrete machine. "
                "Refused unless every check and refinement obligation holds at the scope, "
                "unless force is set (recorded in the manifest)."
            ),
            inputSchema=_schema(
                dialect={
                    "type": "string",
                    "enum": ["ansi", "sqlite"],
                    "description": "SQL dialect (default: ansi)",
                },
                machine=_MACHINE_PROPERTY,
                scope=_SCOPE_PROPERTY,
                budget=_BUDGET_PROPERTY,
                force={
                    "type": "boolean",
                    "description": "Generate without verification (default: false)",
                    "default": False,
                },
            ),
        ),
        Tool(
            name="format_model",
            description="Pretty-print a model in canonical form.",
            inputSchema=_schema(),
        ),
        Tool(
            name="render_class_diagram",
            description="Render the class diagram of a machine as a PNG image.",
            inputSchema=_schema(machine=_MACHINE_PROPERTY),
        ),
    ]
