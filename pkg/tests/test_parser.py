"""
Tests for the .ubdb parser and pretty printer

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import pytest

from ubdb.config import get_bundled_model, list_bundled_models
from ubdb.exceptions import ParseError
from ubdb.model import ast
from ubdb.parser import (
    EMPTY_INPUT,
    format_expression,
    format_predicate,
    load_chain,
    parse_chain,
    parse_expression,
    parse_files,
    parse_predicate,
    pretty_print,
)


class TestParseText:
    """Tests for parsing whole models"""

    def test_parse_dept_model(self, dept_text):
        """Test that the Dept model parses into one context and one machine"""
        chain, diagnostics = parse_chain(dept_text)

        assert diagnostics == []
        assert [c.name for c in chain.contexts] == ["Dept_ctx"]
        machine = chain.machines[0]
        assert machine.name == "Dept"
        assert machine.sees == ("Dept_ctx",)
        assert machine.layer == "structure"
        assert [v.name for v in machine.variables] == ["Staff", "Department", "worksIn", "hasDean"]
        assert [e.name for e in machine.events] == ["addDepartment", "addStaff", "setDean"]

    def test_class_annotations(self, dept_text):
        """Test that class declarations carry kind annotations"""
        machine = load_chain(dept_text).machines[0]

        annotation = machine.annotation_for("Staff")
        assert annotation.kind == "primary"
        assert annotation.supertype is None

    def test_event_header(self, dept_text):
        """Test event kind and owning class"""
        event = load_chain(dept_text).machines[0].event("addStaff")

        assert event.kind == "constructor"
        assert event.class_owner == "Staff"
        assert [p.name for p in event.parameters] == ["this_s", "d"]
        assert [a.label for a in event.actions] == ["act1", "act2"]

    def test_relation_typing(self, dept_text):
        """Test arrows map to relation kinds"""
        machine = load_chain(dept_text).machines[0]

        works_in = next(v for v in machine.variables if v.name == "worksIn")
        has_dean = next(v for v in machine.variables if v.name == "hasDean")
        assert works_in.typing.kind.is_function
        assert works_in.typing.kind.is_total
        assert has_dean.typing.kind.is_function
        assert not has_dean.typing.kind.is_total

    def test_refining_machine_without_sees(self, refinement_text):
        """Test a refining machine may omit its sees clause"""
        chain = load_chain(refinement_text)

        concrete = chain.machine("Conc")
        assert concrete.refines == "Abs"
        assert concrete.sees == ()
        assert concrete.event("addA").extends == "addA"

    def test_comments_are_ignored(self, dept_text):
        """Test line comments anywhere in the text"""
        commented = "// header\n" + dept_text.replace("  layer structure", "  layer structure // first layer")

        assert load_chain(commented) == load_chain(dept_text)

    def test_crlf_and_bom(self, dept_text):
        """Test Windows line endings and a byte-order mark are accepted"""
        text = "\ufeff" + dept_text.replace("\n", "\r\n")

        assert load_chain(text) == load_chain(dept_text)


class TestDiagnostics:
    """Tests for parse diagnostics"""

    def test_empty_input(self):
        """Test that empty input reports the expected top-level keywords"""
        chain, diagnostics = parse_chain("")

        assert chain is None
        assert len(diagnostics) == 1
        assert EMPTY_INPUT in diagnostics[0].message
        assert diagnostics[0].is_error

    def test_reserved_keyword_as_identifier(self):
        """Test a keyword used where a name is expected"""
        chain, diagnostics = parse_chain("context C\n  sets end\nend\n")

        assert chain is None
        assert "reserved keyword" in diagnostics[0].message

    def test_unknown_keyword(self, dept_text):
        """Test a misspelt clause keyword"""
        text = dept_text.replace("  layer structure", "  layr structure")

        chain, diagnostics = parse_chain(text)

        assert chain is None
        assert "unknown keyword 'layr'" in diagnostics[0].message

    def test_span_points_at_error(self):
        """Test that the span carries file, line and column"""
        text = "context C\n  sets A\nend\n\nmachine M\n  sees C\n  class X : A kind primary\n  invariant @i X <: \nend\n"

        chain, diagnostics = parse_chain(text, filename="bad.ubdb")

        assert chain is None
        span = diagnostics[0].span
        assert span.file == "bad.ubdb"
        assert span.line == 9
        assert span.column >= 1
        assert str(diagnostics[0]).startswith("bad.ubdb:9:")

    def test_unexpected_character(self):
        """Test a character outside the lexicon"""
        chain, diagnostics = parse_chain("context C\n  sets A ?\nend\n")

        assert chain is None
        assert "unexpected character" in diagnostics[0].message
        assert diagnostics[0].span.line == 2

    def test_invalid_utf8(self, tmp_path):
        """Test that undecodable bytes are a diagnostic, not an exception"""
        path = tmp_path / "bad.ubdb"
        path.write_bytes(b"context C\n  sets \xff\nend\n")

        chain, diagnostics = parse_chain(path)

        assert chain is None
        assert diagnostics[0].message == "input is not valid UTF-8"
        assert diagnostics[0].span.line == 2
        assert diagnostics[0].span.column == 8

    def test_missing_file(self, tmp_path):
        """Test that an unreadable file is a diagnostic"""
        chain, diagnostics = parse_chain(tmp_path / "missing.ubdb")

        assert chain is None
        assert diagnostics[0].message.startswith("cannot read file")

    def test_load_chain_raises(self):
        """Test load_chain wraps diagnostics in ParseError"""
        with pytest.raises(ParseError) as exc_info:
            load_chain("machine")

        assert exc_info.value.error_code == "PARSE_ERROR"
        assert exc_info.value.diagnostics


class TestParseFiles:
    """Tests for multi-file chains"""

    def test_files_joined_in_order(self, tmp_path, dept_text):
        """Test that contexts and machines from several files form one chain"""
        context_text, machine_text = dept_text.split("\n\n", 1)
        first = tmp_path / "a_ctx.ubdb"
        second = tmp_path / "b_machine.ubdb"
        first.write_text(context_text + "\n")
        second.write_text(machine_text)

        chain, diagnostics = parse_files([first, second])

        assert diagnostics == []
        assert chain == load_chain(dept_text)

    def test_parallel_parse_matches_serial(self, tmp_path):
        """Test that workers do not change the resulting chain"""
        paths = [get_bundled_model(name) for name in list_bundled_models()]

        serial, _ = parse_files(paths)
        parallel, _ = parse_files(paths, workers=4)

        assert serial == parallel


class TestFragments:
    """Tests for expression and predicate fragments"""

    def test_maplet_binds_loosest(self):
        """Test that set operators bind tighter than maplets"""
        expr = parse_expression("a |-> b \\/ c")

        assert isinstance(expr, ast.Maplet)
        assert isinstance(expr.right, ast.BinaryExpr)
        assert expr.right.op == ast.UNION

    def test_set_operators_left_associative(self):
        """Test that set operators share one level and group to the left"""
        expr = parse_expression("a \\/ b \\ c")

        assert isinstance(expr, ast.BinaryExpr)
        assert expr.op == ast.MINUS
        assert isinstance(expr.left, ast.BinaryExpr)
        assert expr.left.op == ast.UNION

    def test_postfix_forms(self):
        """Test inverse, image and application"""
        expr = parse_expression("x~[{z}]")

        assert isinstance(expr, ast.Image)
        assert isinstance(expr.relation, ast.UnaryExpr)
        assert expr.relation.op == ast.INVERSE

    def test_atom_literal(self):
        """Test SET.n literals"""
        assert parse_expression("PERSON.2") == ast.AtomLit("PERSON", 2)

    def test_quantifier(self):
        """Test a universal quantifier with an implication body"""
        pred = parse_predicate("!d : dom(hasDean) . d : Department => worksIn(hasDean(d)) = d")

        assert isinstance(pred, ast.Quantifier)
        assert pred.kind == ast.FORALL
        assert [b.name for b in pred.binders] == ["d"]
        assert isinstance(pred.body, ast.BinaryPred)
        assert pred.body.op == ast.IMPLIES

    def test_function_class_assertion(self):
        """Test f : S --> T parses as a function-class predicate"""
        pred = parse_predicate("f : A --> B")

        assert isinstance(pred, ast.FunctionClass)
        assert pred.kind.is_total

    def test_fragment_error(self):
        """Test malformed fragments raise ParseError"""
        with pytest.raises(ParseError):
            parse_expression("a |->")

    @pytest.mark.parametrize(
        "text",
        [
            "a |-> (b |-> c)",
            "(a \\/ b) ; c",
            "a \\/ (b \\ c)",
            "dom(r~) <| s",
            "{a |-> b, c |-> d}[{a}]",
        ],
    )
    def test_expression_printing_reparses(self, text):
        """Test printed expressions parse back to the same tree"""
        expr = parse_expression(text)

        assert parse_expression(format_expression(expr)) == expr

    @pytest.mark.parametrize(
        "text",
        [
            "(p = q => r = s) => t = u",
            "not (a : S & b : T)",
            "a : S or b : T & c : U",
            "#x : S . x /: T",
        ],
    )
    def test_predicate_printing_reparses(self, text):
        """Test printed predicates keep their grouping"""
        pred = parse_predicate(text)

        assert parse_predicate(format_predicate(pred)) == pred


class TestPrettyPrint:
    """Tests for the canonical formatter"""

    @pytest.mark.parametrize("name", list_bundled_models())
    def test_bundled_models_round_trip(self, name):
        """Test that formatting then parsing gives back the same chain"""
        chain = load_chain(get_bundled_model(name))

        assert load_chain(pretty_print(chain)) == chain

    @pytest.mark.parametrize("name", list_bundled_models())
    def test_formatting_is_idempotent(self, name):
        """Test that fmt of fmt output is unchanged"""
        once = pretty_print(load_chain(get_bundled_model(name)))

        assert pretty_print(load_chain(once)) == once

    def test_output_uses_lf(self, dept_text):
        """Test LF line endings and a trailing newline"""
        text = pretty_print(load_chain(dept_text.replace("\n", "\r\n")))

        assert "\r" not in text
        assert text.endswith("end\n")

    def test_comments_not_preserved(self, dept_text):
        """Test that comments are dropped by the formatter"""
        text = pretty_print(load_chain("// note\n" + dept_text))

        assert "//" not in text
