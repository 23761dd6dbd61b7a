"""
Tests for chain resolution and type checking

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import pytest

from ubdb.exceptions import (
    CyclicRefinementError,
    DuplicateNameError,
    ExtendMismatchError,
    RefinementOrderError,
    UnresolvedNameError,
)
from ubdb.model import ast, has_errors, resolve, typecheck
from ubdb.model.chain import ORIGIN_EXTENDS, ORIGIN_INHERITED, ORIGIN_NEW, ORIGIN_REFINES
from ubdb.parser import load_chain


def _resolve(text: str):
    return resolve(load_chain(text))


class TestResolve:
    """Tests for name binding and effective vocabularies"""

    def test_typing_invariants_generated(self, dept_chain):
        """Test that every relation gets a type_ invariant ahead of declared ones"""
        machine = dept_chain.machine("Dept")

        labels = [i.label for i in machine.invariants]
        assert labels == ["type_worksIn", "type_hasDean", "inv_dean"]
        typing = machine.invariant("type_worksIn").predicate
        assert isinstance(typing, ast.FunctionClass)
        assert typing.kind.is_total

    def test_subclass_invariant(self, sres_chain):
        """Test that subclasses get a sub_ invariant"""
        machine = sres_chain.machine("SRES_structure")

        predicate = machine.invariant("sub_Staff").predicate
        assert predicate == ast.Relational(ast.SUBSET, ast.Name("Staff"), ast.Name("Person"))

    def test_carriers_from_seen_contexts(self, dept_chain):
        """Test carriers come from the seen contexts"""
        machine = dept_chain.machine("Dept")

        assert machine.carriers == ("PERSON", "DEPARTMENT")
        assert machine.class_carriers() == ("PERSON", "DEPARTMENT")
        assert machine.carrier_of("Staff") == "PERSON"

    def test_refinement_inherits_vocabulary(self, refinement_text):
        """Test that a refining machine inherits contexts, variables and events"""
        chain = _resolve(refinement_text)
        concrete = chain.machine("Conc")

        assert concrete.abstract == "Abs"
        assert concrete.contexts == ("Abs_ctx",)
        assert concrete.variable_names == ("A", "x")
        assert concrete.abstract_variables == ("A",)
        assert concrete.gluing == ()

    def test_extends_merges_event(self, refinement_text):
        """Test that extends concatenates parameters, guards and actions"""
        event = _resolve(refinement_text).machine("Conc").event("addA")

        assert event.origin == ORIGIN_EXTENDS
        assert event.abstract == "addA"
        assert event.parameter_names == ("this_a", "v")
        assert [g.label for g in event.guards] == ["grd1"]
        assert event.targets == ("A", "x")
        assert event.kind == "constructor"
        assert event.class_owner == "A"

    def test_event_origins(self, weak_refinement_text, sres_chain):
        """Test new, inherited and refines origins"""
        weak = _resolve(weak_refinement_text).machine("Weak")
        attributes = sres_chain.machine("SRES_attributes")
        secondary = sres_chain.machine("SRES_secondary")
        historical = sres_chain.machine("SRES_historical")

        assert weak.event("addA").origin == ORIGIN_REFINES
        assert attributes.event("addDepartment").origin == ORIGIN_INHERITED
        assert secondary.event("addModuleRun").origin == ORIGIN_NEW
        assert historical.event("graduateStudent") is None
        assert historical.event("completeStudent").abstract == "graduateStudent"

    def test_resolve_is_idempotent(self, dept_chain):
        """Test that resolving a resolved chain gives an identical result"""
        assert resolve(dept_chain) == dept_chain

    def test_unknown_identifier(self, dept_text):
        """Test an undeclared name in a guard"""
        text = dept_text.replace("@grd1 worksIn(s) = d", "@grd1 worksAt(s) = d")

        with pytest.raises(UnresolvedNameError) as exc_info:
            _resolve(text)

        assert exc_info.value.name == "worksAt"
        assert exc_info.value.error_code == "UNRESOLVED_NAME"
        assert exc_info.value.component == "Dept"

    def test_unknown_context(self, dept_text):
        """Test sees naming a missing context"""
        with pytest.raises(UnresolvedNameError):
            _resolve(dept_text.replace("sees Dept_ctx", "sees Other_ctx"))

    def test_duplicate_variable(self, dept_text):
        """Test a variable reusing a carrier set name"""
        text = dept_text.replace("class Staff : PERSON", "class PERSON : PERSON").replace(
            "Staff", "PERSON"
        )

        with pytest.raises(DuplicateNameError):
            _resolve(text)

    def test_duplicate_invariant_label(self, dept_text):
        """Test two invariants with one label"""
        text = dept_text.replace(
            "  invariant @inv_dean",
            "  invariant @inv_dean hasDean <: hasDean\n  invariant @inv_dean",
        )

        with pytest.raises(DuplicateNameError) as exc_info:
            _resolve(text)

        assert exc_info.value.name == "inv_dean"

    def test_parameter_shadows_variable(self, dept_text):
        """Test a parameter named like a state variable"""
        text = dept_text.replace("any d : Department, s : Staff", "any worksIn : Department, s : Staff")

        with pytest.raises(DuplicateNameError):
            _resolve(text)

    def test_cyclic_refinement(self):
        """Test machines refining each other"""
        text = (
            "context C\n  sets S\nend\n"
            "machine M1 refines M2\n  sees C\nend\n"
            "machine M2 refines M1\n  sees C\nend\n"
        )

        with pytest.raises(CyclicRefinementError) as exc_info:
            _resolve(text)

        assert exc_info.value.cycle[0] == exc_info.value.cycle[-1]

    def test_refines_must_be_previous_machine(self, refinement_text):
        """Test refinement order follows declaration order"""
        text = refinement_text + "\nmachine Other refines Abs\nend\n"

        with pytest.raises(RefinementOrderError):
            _resolve(text)

    def test_extends_unknown_event(self, refinement_text):
        """Test extending an event the abstraction does not have"""
        text = refinement_text.replace("event addA extends addA", "event addA extends addB")

        with pytest.raises(ExtendMismatchError) as exc_info:
            _resolve(text)

        assert exc_info.value.event == "addA"

    def test_removes_unknown_variable(self, refinement_text):
        """Test removes naming a variable the abstraction lacks"""
        text = refinement_text.replace("  layer attributes\n", "  layer attributes\n  removes y\n")

        with pytest.raises(UnresolvedNameError):
            _resolve(text)


class TestTypecheck:
    """Tests for typecheck"""

    def test_bundled_models_are_well_typed(self, sres_chain, relation_chain):
        """Test that the bundled models have no type errors"""
        assert not has_errors(typecheck(sres_chain))
        assert not has_errors(typecheck(relation_chain))

    def test_dept_has_no_diagnostics(self, dept_chain):
        """Test a clean model produces no diagnostics"""
        assert typecheck(dept_chain) == []

    def test_type_mismatch_in_action(self, dept_text):
        """Test assigning a pair of the wrong shape"""
        text = dept_text.replace("hasDean <+ {d |-> s}", "hasDean <+ {s |-> d}")

        diagnostics = typecheck(_resolve(text))

        assert has_errors(diagnostics)
        error = next(d for d in diagnostics if d.severity == "error")
        assert error.machine == "Dept"
        assert error.event == "setDean"
        assert error.label == "act1"
        assert "Dept/setDean/act1" in str(error)

    def test_query_with_actions_is_error(self, dept_text):
        """Test query events may not modify state"""
        text = dept_text.replace("event setDean", "event setDean query")

        diagnostics = typecheck(_resolve(text))

        assert any(d.message == "query events have no actions" for d in diagnostics)
        assert has_errors(diagnostics)

    def test_constructor_without_fresh_guard_warns(self, dept_text):
        """Test a constructor that never checks freshness"""
        text = dept_text.replace(
            "    where\n      @grd1 this_d /: Department\n", ""
        )

        diagnostics = typecheck(_resolve(text))

        assert not has_errors(diagnostics)
        assert any("no fresh parameter" in d.message and d.severity == "warning" for d in diagnostics)

    def test_constructor_without_owner_warns(self, dept_text):
        """Test a constructor without 'of CLASS'"""
        text = dept_text.replace("event addDepartment constructor of Department", "event addDepartment constructor")

        diagnostics = typecheck(_resolve(text))

        assert any("no owner class" in d.message for d in diagnostics)
        assert not has_errors(diagnostics)

    def test_refined_event_dropping_parameter_warns(self, weak_refinement_text):
        """Test a refining event that loses an abstract parameter"""
        text = weak_refinement_text.replace(
            "  event addA refines addA\n    any this_a : A_SET\n    then\n      @act1 A := A \\/ {this_a}\n",
            "  event addA refines addA\n    then\n      @act1 A := A\n",
        )

        diagnostics = typecheck(_resolve(text))

        assert any("drops abstract parameter(s) this_a" in d.message for d in diagnostics)

    def test_attribute_must_target_carrier(self, refinement_text):
        """Test an attribute typed by a class"""
        text = refinement_text.replace("attribute x : A --> X_VALUE", "attribute x : A --> A")

        diagnostics = typecheck(_resolve(text))

        assert any("must target a carrier set" in d.message for d in diagnostics)
