"""
Error Helper Utilities

Turns exceptions into dictionaries with suggestions and related commands for
structured CLI output and MCP tool responses.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Any, Dict, List, Optional

from ubdb.exceptions import (
    EvaluationError,
    ModelError,
    ParseError,
    SqlGenError,
    UbdbError,
)


def format_error_response(
    error: Exception, context: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """
    Format an error into a response with suggestions and related commands.

    Args:
        error: The exception that occurred
        context: Additional context about the operation

    Returns:
        Dictionary with error details, suggestions, fixes, and related commands
    """
    if isinstance(error, UbdbError):
        response = error.to_dict()
    else:
        response = {"error": str(error), "error_type": type(error).__name__, "details": {}}

    if context:
        response["context"] = context

    if not response.get("suggestions"):
        response["suggestions"] = get_general_suggestions(error)

    if not response.get("related_commands"):
        response["related_commands"] = get_related_commands(error)

    return response


def get_general_suggestions(error: Exception) -> List[str]:
    """Get general troubleshooting suggestions based on error type"""
    if isinstance(error, ParseError):
        return [
            "Check the reported line and column",
            "Keywords are reserved and cannot be used as identifiers",
        ]
    if isinstance(error, ModelError):
        return ["Run 'ubdb fmt' to see how the chain was read"]
    if isinstance(error, EvaluationError):
        return ["Guard function applications with a domain membership test"]
    if isinstance(error, SqlGenError):
        return ["Run 'ubdb lint' and check class annotations"]
    if isinstance(error, (OSError, UnicodeDecodeError)):
        return ["Check that the path exists and is UTF-8 text"]
    return ["Re-run with --verbose for a debug log"]


def get_related_commands(error: Exception) -> List[str]:
    """Get CLI commands that help with this error"""
    if isinstance(error, ParseError):
        return ["fmt"]
    if isinstance(error, ModelError):
        return ["fmt", "lint"]
    if isinstance(error, EvaluationError):
        return ["check", "animate"]
    if isinstance(error, SqlGenError):
        return ["lint", "check", "generate"]
    return []
