"""
Tests for the finite-model set engine

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import random
from itertools import permutations

import pytest

from ubdb.engine import (
    Atom,
    Evaluator,
    Scope,
    State,
    apply_event,
    enumerate_bindings,
    format_value,
    is_enabled,
    parse_value,
    replay,
    satisfies_function_class,
    scope_exhausted,
)
from ubdb.exceptions import ConflictingAssignmentError, FunctionApplicationError, UnboundNameError
from ubdb.model import ast, resolve
from ubdb.parser import load_chain, parse_expression, parse_predicate

SWAP_MODEL = """\
context Swap_ctx
  sets P
end

machine Swap
  sees Swap_ctx
  class X : P kind primary
  class Y : P kind primary

  event seed
    any p : P
    then
      @act1 X := X \\/ {p}
  end

  event swap
    then
      @act1 X := Y
      @act2 Y := X
  end

  event clash
    any p : P
    then
      @act1 X := {p}
      @act2 X := {}
  end
end
"""

ORDER_MODEL = """\
context Order_ctx
  sets P
end

machine Order
  sees Order_ctx
  class X : P kind primary
  class Y : P kind primary
  class Z : P kind primary

  event mix
    any p : P
    then
{actions}
  end
end
"""

ORDER_ACTIONS = (
    "      @act1 X := Y \\/ {p}",
    "      @act2 Y := X /\\ Z",
    "      @act3 Z := X \\ Y",
)

S1, S2, S3 = Atom("S", 1), Atom("S", 2), Atom("S", 3)

PROPERTY_TRIALS = 200


@pytest.fixture
def evaluator():
    return Evaluator(Scope({"S": 3}))


def _eval(evaluator, text):
    return evaluator.evaluate(parse_expression(text))


def _holds(evaluator, text):
    return evaluator.holds(parse_predicate(text))


class TestValues:
    """Tests for atoms, scopes and states"""

    def test_atom_identity_and_order(self):
        """Test atoms compare by carrier and index"""
        assert Atom("S", 1) == S1
        assert str(S2) == "S.2"
        assert sorted([S3, S1, S2]) == [S1, S2, S3]
        assert Atom("S", 1) != Atom("T", 1)

    def test_scope_atoms(self):
        """Test a scope enumerates 1..n per carrier"""
        scope = Scope({"S": 3, "T": 0})

        assert scope.atoms("S") == (S1, S2, S3)
        assert scope.atoms("T") == ()
        assert scope.bound("S") == 3
        assert str(scope) == "S=3, T=0"

    def test_negative_bound_rejected(self):
        """Test scope bounds must be non-negative"""
        with pytest.raises(ValueError):
            Scope({"S": -1})

    def test_default_bounds_by_carrier_category(self, relation_chain):
        """Test class carriers and value carriers get different default bounds"""
        scope = Scope.for_chain(relation_chain)

        assert scope.bound("A_SET") == 2
        assert scope.bound("X_VALUE") == 3

    def test_default_bounds_from_environment(self, monkeypatch, relation_chain):
        """Test UBDB_CLASS_SCOPE and UBDB_VALUE_SCOPE"""
        monkeypatch.setenv("UBDB_CLASS_SCOPE", "1")
        monkeypatch.setenv("UBDB_VALUE_SCOPE", "4")

        scope = Scope.for_chain(relation_chain, {"B_SET": 3})

        assert scope.bound("A_SET") == 1
        assert scope.bound("B_SET") == 3
        assert scope.bound("X_VALUE") == 4

    def test_state_update_is_persistent(self):
        """Test updated returns a new state"""
        state = State.empty(("X", "Y"))
        changed = state.updated({"X": frozenset({S1})})

        assert state["X"] == frozenset()
        assert changed["X"] == frozenset({S1})
        assert changed != state
        assert changed.as_text() == "X = {S.1}, Y = {}"

    def test_format_value(self):
        """Test values print in expression syntax, sets sorted"""
        assert format_value((S1, S2)) == "S.1 |-> S.2"
        assert format_value(frozenset({S3, S1})) == "{S.1, S.3}"
        assert format_value(frozenset({(S2, S1), (S1, S2)})) == "{S.1 |-> S.2, S.2 |-> S.1}"

    def test_parse_value_reads_format(self):
        """Test parse_value reads back what format_value writes"""
        value = frozenset({(S1, S2), (S2, S3)})

        assert parse_value(format_value(value)) == value
        assert parse_value("S.2") == S2


class TestEvaluator:
    """Tests for expression and predicate evaluation"""

    def test_carrier_set(self, evaluator):
        """Test a carrier name denotes its atoms"""
        assert _eval(evaluator, "S") == frozenset({S1, S2, S3})

    def test_set_operators(self, evaluator):
        """Test union, difference and intersection"""
        assert _eval(evaluator, "{S.1} \\/ {S.2}") == frozenset({S1, S2})
        assert _eval(evaluator, "S \\ {S.2}") == frozenset({S1, S3})
        assert _eval(evaluator, "S /\\ {S.3}") == frozenset({S3})
        assert _eval(evaluator, "{}") == frozenset()

    def test_relation_operators(self, evaluator):
        """Test composition, override and domain restriction/subtraction"""
        assert _eval(evaluator, "{S.1 |-> S.2} ; {S.2 |-> S.3}") == frozenset({(S1, S3)})
        assert _eval(evaluator, "{S.1 |-> S.2, S.2 |-> S.2} <+ {S.1 |-> S.3}") == frozenset(
            {(S1, S3), (S2, S2)}
        )
        assert _eval(evaluator, "{S.1} <| {S.1 |-> S.2, S.2 |-> S.3}") == frozenset({(S1, S2)})
        assert _eval(evaluator, "{S.1} <-| {S.1 |-> S.2, S.2 |-> S.3}") == frozenset({(S2, S3)})
        assert _eval(evaluator, "{S.1} ** {S.2, S.3}") == frozenset({(S1, S2), (S1, S3)})

    def test_unary_operators(self, evaluator):
        """Test dom, ran, inverse and power set"""
        relation = "{S.1 |-> S.2, S.3 |-> S.2}"

        assert _eval(evaluator, f"dom({relation})") == frozenset({S1, S3})
        assert _eval(evaluator, f"ran({relation})") == frozenset({S2})
        assert _eval(evaluator, f"{{S.1 |-> S.2}}~") == frozenset({(S2, S1)})
        assert len(_eval(evaluator, "POW(S)")) == 8

    def test_image_and_application(self, evaluator):
        """Test relational image and function application"""
        assert _eval(evaluator, "{S.1 |-> S.2, S.1 |-> S.3, S.2 |-> S.1}[{S.1}]") == frozenset({S2, S3})
        assert _eval(evaluator, "{S.1 |-> S.2}(S.1)") == S2

    def test_application_outside_domain(self, evaluator):
        """Test f(x) with x outside dom(f)"""
        with pytest.raises(FunctionApplicationError) as exc_info:
            _eval(evaluator, "{S.1 |-> S.2}(S.3)")

        assert "outside its domain" in exc_info.value.message
        assert exc_info.value.error_code == "FUNCTION_APPLICATION_OUTSIDE_DOMAIN"

    def test_application_not_functional(self, evaluator):
        """Test f(x) where f relates x to two values"""
        with pytest.raises(FunctionApplicationError) as exc_info:
            _eval(evaluator, "{S.1 |-> S.2, S.1 |-> S.3}(S.1)")

        assert "not functional" in exc_info.value.message

    def test_unbound_name(self, evaluator):
        """Test a free name with no value"""
        with pytest.raises(UnboundNameError):
            _eval(evaluator, "missing")

    def test_predicates(self, evaluator):
        """Test connectives and relational operators"""
        assert _holds(evaluator, "S.1 : S & S.1 /: {S.2}")
        assert _holds(evaluator, "{S.1} <: S")
        assert _holds(evaluator, "S.1 = S.2 or S.1 /= S.2")
        assert _holds(evaluator, "S.1 = S.2 => false")
        assert _holds(evaluator, "not (S.1 = S.2) <=> true")

    def test_quantifiers(self, evaluator):
        """Test universal and existential quantification over finite sets"""
        assert _holds(evaluator, "!x : S . x : S")
        assert not _holds(evaluator, "#x : S . x /: S")
        assert _holds(evaluator, "#x : S, y : S . x /= y")
        assert _holds(evaluator, "!x : {} . false")

    def test_function_class_predicate(self, evaluator):
        """Test f : A --> B style assertions"""
        assert _holds(evaluator, "{S.1 |-> S.2} : {S.1} --> S")
        assert not _holds(evaluator, "{S.1 |-> S.2} : {S.1, S.2} --> S")
        assert _holds(evaluator, "{S.1 |-> S.2} : {S.1, S.2} +-> S")

    @pytest.mark.parametrize(
        "relation,kind,expected",
        [
            (frozenset({(S1, S2), (S2, S2)}), ast.TOTAL_FUNCTION, True),
            (frozenset({(S1, S2), (S2, S2)}), ast.RelationKind("total-function", True), False),
            (frozenset({(S1, S2), (S1, S3)}), ast.PARTIAL_FUNCTION, False),
            (frozenset({(S1, S2), (S1, S3)}), ast.RELATION, True),
            (frozenset({(S1, S2)}), ast.TOTAL_FUNCTION, False),
        ],
    )
    def test_satisfies_function_class(self, relation, kind, expected):
        """Test the finite function-class definitions"""
        source = frozenset({S1, S2})
        target = frozenset({S1, S2, S3})

        assert satisfies_function_class(relation, source, target, kind) is expected


class TestEvents:
    """Tests for guard enumeration and event application"""

    @pytest.fixture
    def swap_machine(self):
        return resolve(load_chain(SWAP_MODEL)).machine("Swap")

    def test_constructor_bindings(self, dept_chain, dept_scope):
        """Test only fresh atoms are offered to a constructor"""
        machine = dept_chain.machine("Dept")
        event = machine.event("addDepartment")
        state = State.empty(machine.variable_names).updated(
            {"Department": frozenset({Atom("DEPARTMENT", 1)})}
        )

        bindings = enumerate_bindings(event, state, dept_scope, machine)

        assert bindings == [{"this_d": Atom("DEPARTMENT", 2)}]

    def test_bindings_sorted_by_parameter_then_value(self, dept_chain, dept_scope):
        """Test deterministic binding order"""
        machine = dept_chain.machine("Dept")
        departments = frozenset({Atom("DEPARTMENT", 1), Atom("DEPARTMENT", 2)})
        state = State.empty(machine.variable_names).updated({"Department": departments})

        bindings = enumerate_bindings(machine.event("addStaff"), state, dept_scope, machine)

        assert bindings == [
            {"d": Atom("DEPARTMENT", 1), "this_s": Atom("PERSON", 1)},
            {"d": Atom("DEPARTMENT", 1), "this_s": Atom("PERSON", 2)},
            {"d": Atom("DEPARTMENT", 2), "this_s": Atom("PERSON", 1)},
            {"d": Atom("DEPARTMENT", 2), "this_s": Atom("PERSON", 2)},
        ]

    def test_no_bindings_from_empty_state(self, dept_chain, dept_scope):
        """Test an event needing existing instances is disabled initially"""
        machine = dept_chain.machine("Dept")
        state = State.empty(machine.variable_names)

        assert enumerate_bindings(machine.event("addStaff"), state, dept_scope, machine) == []

    def test_is_enabled_checks_guards(self, dept_chain, dept_scope):
        """Test is_enabled evaluates typing and guards for one binding"""
        machine = dept_chain.machine("Dept")
        event = machine.event("addDepartment")
        state = State.empty(machine.variable_names).updated(
            {"Department": frozenset({Atom("DEPARTMENT", 1)})}
        )

        assert is_enabled(event, {"this_d": Atom("DEPARTMENT", 2)}, state, dept_scope, machine)
        assert not is_enabled(event, {"this_d": Atom("DEPARTMENT", 1)}, state, dept_scope, machine)
        assert not is_enabled(event, {}, state, dept_scope, machine)

    def test_apply_event(self, dept_chain, dept_scope):
        """Test a constructor adds the instance and its link"""
        machine = dept_chain.machine("Dept")
        d1, p1 = Atom("DEPARTMENT", 1), Atom("PERSON", 1)
        state = State.empty(machine.variable_names).updated({"Department": frozenset({d1})})

        after = apply_event(machine.event("addStaff"), {"this_s": p1, "d": d1}, state, dept_scope, machine)

        assert after["Staff"] == frozenset({p1})
        assert after["worksIn"] == frozenset({(p1, d1)})
        assert after["Department"] == frozenset({d1})

    def test_actions_read_pre_state(self, swap_machine):
        """Test all actions see the pre-state and assign simultaneously"""
        scope = Scope({"P": 2})
        p1 = Atom("P", 1)
        state = State.empty(swap_machine.variable_names)

        seeded = apply_event(swap_machine.event("seed"), {"p": p1}, state, scope, swap_machine)
        swapped = apply_event(swap_machine.event("swap"), {}, seeded, scope, swap_machine)

        assert swapped["X"] == frozenset()
        assert swapped["Y"] == frozenset({p1})

    def test_conflicting_assignment(self, swap_machine):
        """Test two actions on one variable"""
        state = State.empty(swap_machine.variable_names)

        with pytest.raises(ConflictingAssignmentError) as exc_info:
            apply_event(swap_machine.event("clash"), {"p": Atom("P", 1)}, state, Scope({"P": 1}), swap_machine)

        assert exc_info.value.variable == "X"

    def test_replay(self, dept_chain, dept_scope):
        """Test replay returns every post-state and rejects disabled steps"""
        machine = dept_chain.machine("Dept")
        d1, p1 = Atom("DEPARTMENT", 1), Atom("PERSON", 1)
        steps = [
            (machine.event("addDepartment"), {"this_d": d1}),
            (machine.event("addStaff"), {"this_s": p1, "d": d1}),
        ]
        initial = State.empty(machine.variable_names)

        states = replay(steps, initial, dept_scope, machine)

        assert len(states) == 2
        assert states[-1]["worksIn"] == frozenset({(p1, d1)})
        with pytest.raises(ValueError, match="step 2: event 'addDepartment' is not enabled"):
            replay([steps[0], steps[0]], initial, dept_scope, machine)

    def test_scope_exhausted(self, dept_chain):
        """Test a constructor with every atom used"""
        machine = dept_chain.machine("Dept")
        scope = Scope.for_chain(dept_chain, {"PERSON": 1, "DEPARTMENT": 1})
        full = State.empty(machine.variable_names).updated(
            {"Department": frozenset({Atom("DEPARTMENT", 1)})}
        )

        assert scope_exhausted(machine, machine.event("addDepartment"), full, scope) == "DEPARTMENT"
        assert scope_exhausted(machine, machine.event("addStaff"), full, scope) is None
        assert scope_exhausted(machine, machine.event("setDean"), full, scope) is None


def _random_relation(rng):
    atoms = (S1, S2, S3)
    return frozenset((a, b) for a in atoms for b in atoms if rng.random() < 0.4)


def _random_set(rng):
    return frozenset(a for a in (S1, S2, S3) if rng.random() < 0.5)


class TestOperatorLaws:
    """Tests relational operators against their pointwise definitions on random relations"""

    def test_override(self, evaluator):
        """Test R <+ Q keeps Q and the part of R outside dom(Q)"""
        rng = random.Random(11)
        override = parse_expression("R <+ Q")
        rebuilt = parse_expression("(dom(Q) <-| R) \\/ Q")

        for _ in range(PROPERTY_TRIALS):
            r, q = _random_relation(rng), _random_relation(rng)
            binding = {"R": r, "Q": q}
            q_domain = {x for x, _ in q}
            expected = frozenset(q | {(x, y) for x, y in r if x not in q_domain})

            assert evaluator.evaluate(override, binding=binding) == expected
            assert evaluator.evaluate(rebuilt, binding=binding) == expected

    def test_domain_subtraction(self, evaluator):
        """Test A <-| R drops exactly the pairs starting in A, and complements A <| R"""
        rng = random.Random(12)
        subtraction = parse_expression("A <-| R")
        restriction = parse_expression("A <| R")

        for _ in range(PROPERTY_TRIALS):
            a, r = _random_set(rng), _random_relation(rng)
            binding = {"A": a, "R": r}
            kept = evaluator.evaluate(subtraction, binding=binding)
            restricted = evaluator.evaluate(restriction, binding=binding)

            assert kept == frozenset((x, y) for x, y in r if x not in a)
            assert kept | restricted == r
            assert not kept & restricted

    def test_inverse_composition(self, evaluator):
        """Test R1~ ; R2 against a double loop over both relations"""
        rng = random.Random(13)
        composed = parse_expression("R1~ ; R2")

        for _ in range(PROPERTY_TRIALS):
            r1, r2 = _random_relation(rng), _random_relation(rng)
            expected = frozenset((a, c) for b, a in r1 for b2, c in r2 if b == b2)

            assert evaluator.evaluate(composed, binding={"R1": r1, "R2": r2}) == expected

    def test_action_order_is_irrelevant(self):
        """Test every ordering of an event's actions gives the same post-state"""
        rng = random.Random(14)
        scope = Scope({"P": 3})
        atoms = scope.atoms("P")
        machines = [
            resolve(load_chain(ORDER_MODEL.format(actions="\n".join(order)))).machine("Order")
            for order in permutations(ORDER_ACTIONS)
        ]
        assert len(machines) == 6

        for _ in range(50):
            values = {name: frozenset(a for a in atoms if rng.random() < 0.5) for name in ("X", "Y", "Z")}
            binding = {"p": rng.choice(atoms)}
            posts = {
                apply_event(
                    machine.event("mix"),
                    binding,
                    State.empty(machine.variable_names).updated(values),
                    scope,
                    machine,
                )
                for machine in machines
            }

            assert len(posts) == 1
            post = posts.pop()
            assert post["X"] == values["Y"] | {binding["p"]}
            assert post["Z"] == values["X"] - values["Y"]
