"""
Tests for error helper utilities

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from ubdb.exceptions import (
    FunctionApplicationError,
    ParseError,
    TraceReplayError,
    UnannotatedClassError,
    UnresolvedNameError,
    UnsupportedGuardError,
)
from ubdb.utils.error_helper import (
    format_error_response,
    get_general_suggestions,
    get_related_commands,
)


class TestFormatErrorResponse:
    """Tests for format_error_response"""

    def test_format_ubdb_error(self):
        """Test an error's own suggestions and commands are kept"""
        error = UnresolvedNameError("Unknown identifier 'worksAt'", name="worksAt")

        result = format_error_response(error)

        assert result["error"] == "Unknown identifier 'worksAt'"
        assert result["error_code"] == "UNRESOLVED_NAME"
        assert result["details"] == {"name": "worksAt"}
        assert result["related_commands"] == ["fmt", "lint"]
        assert any("worksAt" in s for s in result["suggestions"])

    def test_format_generic_error(self):
        """Test formatting generic exception"""
        result = format_error_response(ValueError("Invalid value"))

        assert result["error"] == "Invalid value"
        assert result["error_type"] == "ValueError"
        assert result["suggestions"] == ["Re-run with --verbose for a debug log"]
        assert result["related_commands"] == []

    def test_format_error_with_context(self):
        """Test formatting error with context"""
        error = TraceReplayError("step 2: addA is not enabled", step=2)
        context = {"command": "animate"}

        result = format_error_response(error, context)

        assert result["context"] == context
        assert result["error_code"] == "TRACE_REPLAY"

    def test_fixes_survive(self):
        """Test fixes carried by the error reach the response"""
        result = format_error_response(UnannotatedClassError("Class 'A' has no kind", class_name="A"))

        assert result["fixes"] == ["Declare the variable with 'class NAME : SET kind KIND'"]
        assert result["related_commands"] == ["lint", "check", "generate"]


class TestGeneralSuggestions:
    """Tests for get_general_suggestions"""

    def test_parse_error_suggestions(self):
        """Test suggestions for parse errors"""
        suggestions = get_general_suggestions(ParseError("Parsing failed"))

        assert any("line and column" in s for s in suggestions)

    def test_evaluation_error_suggestions(self):
        """Test suggestions for well-definedness failures"""
        error = FunctionApplicationError("worksIn applied outside its domain", function="worksIn")

        suggestions = get_general_suggestions(error)

        assert any("domain" in s for s in suggestions)

    def test_file_error_suggestions(self):
        """Test suggestions for unreadable files"""
        suggestions = get_general_suggestions(FileNotFoundError("model.ubdb"))

        assert any("path" in s for s in suggestions)


class TestRelatedCommands:
    """Tests for get_related_commands"""

    def test_parse_error_commands(self):
        """Test related commands for parse errors"""
        assert get_related_commands(ParseError("Parsing failed")) == ["fmt"]

    def test_sqlgen_error_commands(self):
        """Test related commands for untranslatable models"""
        error = UnsupportedGuardError("Guard cannot be translated", event="setDean", label="grd1")

        assert "lint" in get_related_commands(error)

    def test_generic_error_commands(self):
        """Test related commands for generic errors"""
        assert get_related_commands(Exception("Generic error")) == []
