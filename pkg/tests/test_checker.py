"""
Tests for obligation checking, refinement checking and reports

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import json
import time

import pytest

from ubdb.checker import (
    BY_CONSTRUCTION,
    FEAS,
    GLU,
    GRD,
    HOLDS,
    INV,
    SCOPE_EXHAUSTED,
    SIM,
    VIOLATED,
    CheckReport,
    ReportRecord,
    Trace,
    TraceStep,
    check,
    check_chain_refinements,
    check_enabledness,
    check_machines_async,
    check_refinement,
    explore,
    explore_refinement,
    generate_obligations,
    reachable_states,
    render_structured,
    render_text,
    replay_trace,
    run_result,
    summarize,
    trace_from_records,
)
from ubdb.checker.obligations import ProofObligation
from ubdb.checker.symmetry import Symmetry, literal_carriers
from ubdb.config import get_bundled_model
from ubdb.engine import Atom, Scope, State
from ubdb.exceptions import TraceReplayError, UsageError
from ubdb.model import resolve
from ubdb.parser import load_chain

DROP_MODEL = """\
context Abs_ctx
  sets A_SET
end

machine Abs
  sees Abs_ctx
  layer structure
  class A : A_SET kind primary

  event addA constructor of A
    any this_a : A_SET
    where
      @grd1 this_a /: A
    then
      @act1 A := A \\/ {this_a}
  end
end

// dropA is new but removes from the abstract class A
machine Drop refines Abs
  layer structure

  event dropA
    any a : A
    then
      @act1 A := A \\ {a}
  end
end
"""


def _sres_text() -> str:
    return get_bundled_model("sres").read_text(encoding="utf-8")


def _report(reports, kind, event, label=None):
    for report in reports:
        ob = report.obligation
        if ob.kind == kind and ob.event == event and ob.invariant_label == label:
            return report
    raise AssertionError(f"no {kind} report for {event}/{label}")


@pytest.fixture
def unguarded_scope(unguarded_dept_chain):
    return Scope.for_chain(unguarded_dept_chain, {"PERSON": 2, "DEPARTMENT": 2})


@pytest.fixture
def refinement_chain(refinement_text):
    return resolve(load_chain(refinement_text))


@pytest.fixture
def refinement_scope(refinement_chain):
    return Scope.for_chain(refinement_chain, {"A_SET": 2, "X_VALUE": 2})


class TestCheck:
    """Tests for INV and FEAS checking of single machines"""

    def test_all_obligations_hold(self, dept_chain, dept_scope):
        """Test a correct model: every INV and FEAS holds"""
        reports = check(dept_chain, dept_scope)

        assert len(reports) == 3 * 3 + 3
        assert all(r.verdict == HOLDS for r in reports)
        assert all(r.counterexample is None for r in reports)
        assert all(r.states_explored > 1 for r in reports)

    def test_obligation_order(self, dept_chain, dept_scope):
        """Test INV per (event, invariant) first, then FEAS per event"""
        reports = check(dept_chain, dept_scope)

        keys = [(r.obligation.kind, r.obligation.event, r.obligation.invariant_label) for r in reports]
        assert keys[:3] == [
            (INV, "addDepartment", "type_worksIn"),
            (INV, "addDepartment", "type_hasDean"),
            (INV, "addDepartment", "inv_dean"),
        ]
        assert keys[-3:] == [(FEAS, "addDepartment", None), (FEAS, "addStaff", None), (FEAS, "setDean", None)]

    def test_missing_guard_breaks_invariant(self, unguarded_dept_chain, unguarded_scope):
        """Test setDean without its guard violates inv_dean with a shortest trace"""
        reports = check(unguarded_dept_chain, unguarded_scope)

        report = _report(reports, INV, "setDean", "inv_dean")
        assert report.verdict == VIOLATED
        trace = report.counterexample
        assert len(trace) == 4
        assert [step.event for step in trace] == ["addDepartment", "addDepartment", "addStaff", "setDean"]
        assert trace.steps[-1].describe() == "setDean(d = DEPARTMENT.2, s = PERSON.1)"

        others = [r for r in reports if r is not report]
        assert all(r.verdict == HOLDS for r in others)

    def test_counterexample_replays(self, unguarded_dept_chain, unguarded_scope):
        """Test a counterexample replays to a state breaking the invariant"""
        machine = unguarded_dept_chain.machine("Dept")
        report = _report(check(unguarded_dept_chain, unguarded_scope), INV, "setDean", "inv_dean")

        states = replay_trace(report.counterexample, machine, unguarded_scope)

        assert len(states) == 4
        assert states[-1] == report.counterexample.final_state
        assert states[-1]["hasDean"] == frozenset({(Atom("DEPARTMENT", 2), Atom("PERSON", 1))})

    def test_single_department_cannot_break_invariant(self, unguarded_dept_chain):
        """Test the same model holds when the scope admits one department"""
        scope = Scope.for_chain(unguarded_dept_chain, {"PERSON": 2, "DEPARTMENT": 1})

        report = _report(check(unguarded_dept_chain, scope), INV, "setDean", "inv_dean")

        assert report.verdict == HOLDS

    def test_scope_exhausted_constructor(self, dept_chain):
        """Test a constructor with no atoms to create reports scope-exhausted"""
        scope = Scope.for_chain(dept_chain, {"PERSON": 0, "DEPARTMENT": 1})

        reports = check(dept_chain, scope)

        feas = _report(reports, FEAS, "addStaff")
        assert feas.verdict == SCOPE_EXHAUSTED
        assert feas.note == "no fresh PERSON atom left at PERSON=0"
        assert feas.counterexample is None

    def test_never_enabled_event(self, dept_chain):
        """Test an event no reachable state enables is a violated FEAS with an empty trace"""
        scope = Scope.for_chain(dept_chain, {"PERSON": 0, "DEPARTMENT": 1})

        feas = _report(check(dept_chain, scope), FEAS, "setDean")

        assert feas.verdict == VIOLATED
        assert len(feas.counterexample) == 0
        assert feas.note == "never enabled in a reachable state"

    def test_budget_exhaustion(self, dept_chain, dept_scope):
        """Test a small state budget leaves obligations scope-exhausted"""
        reports = check(dept_chain, dept_scope, budget=2)

        inv = _report(reports, INV, "setDean", "inv_dean")
        assert inv.verdict == SCOPE_EXHAUSTED
        assert "state budget of 2" in inv.note

    def test_unknown_machine(self, dept_chain, dept_scope):
        """Test asking for a machine the chain does not have"""
        with pytest.raises(UsageError):
            check(dept_chain, dept_scope, machine="Nope")

    def test_check_accepts_unresolved_chain(self, dept_text, dept_chain, dept_scope):
        """Test check resolves a parsed chain itself"""
        from_text = check(load_chain(dept_text), dept_scope)

        assert [r.verdict for r in from_text] == [r.verdict for r in check(dept_chain, dept_scope)]

    def test_generate_obligations(self, refinement_chain):
        """Test the obligation list covers both machines and the refinement step"""
        kinds = [(o.kind, o.machine, o.event) for o in generate_obligations(refinement_chain)]

        assert (FEAS, "Abs", "addA") in kinds
        assert (INV, "Conc", "addA") in kinds
        assert (GRD, "Conc", "addA") in kinds
        assert (SIM, "Conc", "addA") in kinds


class TestEnabledness:
    """Tests for constructor reachability and circular dependencies"""

    def test_circular_total_dependency(self):
        """Test two total associations in opposite directions block both constructors"""
        chain = resolve(load_chain(get_bundled_model("circular_total")))
        scope = Scope.for_chain(chain, {"PERSON": 2, "DEPARTMENT": 2})

        reports = check_enabledness(chain, scope)

        assert [r.obligation.kind for r in reports] == [FEAS, FEAS]
        by_event = {r.obligation.event: r for r in reports}
        for report in reports:
            assert report.verdict == VIOLATED
            assert len(report.counterexample) == 0
            assert "circular dependency: addDepartment -> addStaff -> addDepartment" in report.note
        assert by_event["addStaff"].note.startswith("needs Department, never populated")
        assert by_event["addDepartment"].note.startswith("needs Staff, never populated")

    def test_circular_partial_resolved(self):
        """Test making one direction partial lets every event fire"""
        chain = resolve(load_chain(get_bundled_model("circular_partial")))
        scope = Scope.for_chain(chain, {"PERSON": 2, "DEPARTMENT": 2})

        reports = check_enabledness(chain, scope)

        assert {r.obligation.event for r in reports} == {"addStaff", "addDepartment", "setDean"}
        assert all(r.verdict == HOLDS for r in reports)


class TestRefinement:
    """Tests for GRD, SIM and GLU checking"""

    def test_extension_refines(self, refinement_chain, refinement_scope):
        """Test an extended constructor strengthens nothing and simulates its abstraction"""
        reports = check_refinement(refinement_chain, refinement_scope)

        grd = _report(reports, GRD, "addA")
        sim = _report(reports, SIM, "addA")
        assert grd.verdict == HOLDS
        assert grd.note == BY_CONSTRUCTION
        assert sim.verdict == HOLDS
        assert grd.obligation.abstract == "Abs"
        assert not [r for r in reports if r.obligation.kind == GLU]

    def test_weakened_guard_breaks_grd(self, weak_refinement_text):
        """Test a concrete event enabled where the abstract one is not"""
        chain = resolve(load_chain(weak_refinement_text))
        scope = Scope.for_chain(chain, {"A_SET": 2})

        reports = check_refinement(chain, scope)

        grd = _report(reports, GRD, "addA")
        assert grd.verdict == VIOLATED
        assert [step.describe() for step in grd.counterexample] == [
            "addA(this_a = A_SET.1)",
            "addA(this_a = A_SET.1)",
        ]
        assert "not enabled" in grd.note
        replay_trace(grd.counterexample, chain.machine("Weak"), scope)

    def test_chain_without_refinement(self, dept_chain, dept_scope):
        """Test refine-check on a single-machine chain"""
        with pytest.raises(UsageError, match="no refinement step"):
            check_refinement(dept_chain, dept_scope)

    def test_wrong_machine_pair(self, refinement_chain, refinement_scope):
        """Test naming machines that are not a direct refinement step"""
        with pytest.raises(UsageError):
            check_refinement(refinement_chain, refinement_scope, abstract="Conc", concrete="Abs")

    def test_chain_refinements(self, refinement_chain, refinement_scope):
        """Test every step of the chain is checked"""
        reports = check_chain_refinements(refinement_chain, refinement_scope)

        assert {r.obligation.machine for r in reports} == {"Conc"}
        assert all(r.verdict == HOLDS for r in reports)


class TestDivergedPairs:
    """Tests that a transition failing simulation is reported but not explored further"""

    def test_sim_failure_stays_on_its_event(self):
        """Test a new event writing an abstract variable breaks SIM without a follow-on GRD failure"""
        chain = resolve(load_chain(DROP_MODEL))
        scope = Scope.for_chain(chain, {"A_SET": 2})

        reports = check_refinement(chain, scope)

        sim = _report(reports, SIM, "dropA")
        assert sim.verdict == VIOLATED
        assert "differ for A" in sim.note
        assert [step.event for step in sim.counterexample] == ["addA", "dropA"]
        assert _report(reports, GRD, "addA").verdict == HOLDS
        assert _report(reports, SIM, "addA").verdict == HOLDS

    def test_diverged_pair_not_enqueued(self):
        """Test every explored pair agrees on the shared variables"""
        chain = resolve(load_chain(DROP_MODEL))
        scope = Scope.for_chain(chain, {"A_SET": 2})

        joint = explore_refinement(chain.machine("Abs"), chain.machine("Drop"), scope, symmetry=False)

        assert set(joint.sim) == {"dropA"}
        assert not joint.grd
        # one pair per subset of A_SET
        assert joint.states == 4


class TestSresChain:
    """Tests for the bundled student records chain"""

    @pytest.mark.slow
    def test_chain_holds_at_default_scope(self, sres_chain):
        """Test every obligation of every machine and refinement step holds within a minute"""
        started = time.monotonic()

        reports = check(sres_chain) + check_chain_refinements(sres_chain)

        elapsed = time.monotonic() - started
        failing = [(r.obligation.kind, r.obligation.machine, r.obligation.event, r.verdict) for r in reports]
        assert [f for f in failing if f[3] != HOLDS] == []
        assert {r.obligation.machine for r in reports} == {m.name for m in sres_chain.machines}
        assert elapsed < 60

    def test_missing_offering_guard_breaks_inv1(self, sres_chain):
        """Test addRegistration without grd2 registers a student on a module their program lacks"""
        text = _sres_text().replace("      @grd2 runningModule(m) |-> enrolledIn(s) : offeredIn\n", "")
        chain = resolve(load_chain(text))
        machine = chain.machine("SRES_secondary")
        scope = Scope.uniform(machine.carriers, 1)

        report = _report(check(chain, scope, machine="SRES_secondary"), INV, "addRegistration", "inv1")

        assert report.verdict == VIOLATED
        trace = report.counterexample
        assert len(trace) <= 6
        assert trace.steps[-1].event == "addRegistration"
        states = replay_trace(trace, machine, scope)
        assert states[-1] == trace.final_state
        assert states[-1]["Registration"] == frozenset({Atom("REGISTRATION", 1)})

    def test_reused_constructor_atom_breaks_typing(self, sres_chain):
        """Test addStaff without its freshness guard gives one person two departments"""
        text = _sres_text().replace("      @grd1 this_Staff /: Person\n", "")
        chain = resolve(load_chain(text))
        machine = chain.machine("SRES_structure")
        scope = Scope.uniform(machine.carriers, 1).with_overrides({"DEPARTMENT": 2})

        report = _report(check(chain, scope, machine="SRES_structure"), INV, "addStaff", "type_worksIn")

        assert report.verdict == VIOLATED
        steps = [step.event for step in report.counterexample]
        assert steps.count("addStaff") == 2
        assert steps.count("addDepartment") == 2
        staff = [step.binding_dict["this_Staff"] for step in report.counterexample if step.event == "addStaff"]
        assert staff[0] == staff[1]
        replay_trace(report.counterexample, machine, scope)

    def test_completion_refines_graduation(self, sres_chain):
        """Test completeStudent simulates the graduation it extends"""
        scope = Scope.uniform(sres_chain.machine("SRES_historical").carriers, 1)

        reports = check_refinement(sres_chain, scope, concrete="SRES_historical")

        assert _report(reports, SIM, "completeStudent").verdict == HOLDS
        assert _report(reports, GRD, "addRegistration").verdict == HOLDS
        assert all(r.verdict == HOLDS for r in reports)


class TestSymmetry:
    """Tests for exploration up to renaming of interchangeable atoms"""

    def test_symmetric_carriers(self, dept_chain, dept_text):
        """Test carriers with a literal atom or a single atom are not reduced"""
        machine = dept_chain.machine("Dept")
        named = resolve(load_chain(dept_text.replace(
            "      @grd1 this_d /: Department\n",
            "      @grd1 this_d /: Department\n      @grd2 this_d /= DEPARTMENT.2\n",
        ))).machine("Dept")

        assert Symmetry.for_machines(Scope({"PERSON": 2, "DEPARTMENT": 2}), [machine]).carriers == {
            "PERSON",
            "DEPARTMENT",
        }
        assert Symmetry.for_machines(Scope({"PERSON": 1, "DEPARTMENT": 2}), [machine]).carriers == {"DEPARTMENT"}
        assert literal_carriers([named]) == {"DEPARTMENT"}
        assert Symmetry.for_machines(Scope({"PERSON": 1, "DEPARTMENT": 2}), [named]) is None

    def test_renamed_states_share_a_representative(self, dept_chain):
        """Test swapping two departments gives the same canonical state"""
        machine = dept_chain.machine("Dept")
        symmetry = Symmetry({"PERSON", "DEPARTMENT"})
        d1, d2, p1 = Atom("DEPARTMENT", 1), Atom("DEPARTMENT", 2), Atom("PERSON", 1)
        names = machine.variable_names
        empty = State.empty(names)
        one = empty.updated(
            {"Department": frozenset({d1, d2}), "Staff": frozenset({p1}), "worksIn": frozenset({(p1, d1)})}
        )
        other = one.relabelled({d1: d2, d2: d1})

        first, first_back = symmetry.canonical(one.values)
        second, second_back = symmetry.canonical(other.values)

        assert first == second
        assert State(names, first).relabelled(first_back or {}) == one
        assert State(names, second).relabelled(second_back or {}) == other

    @pytest.mark.parametrize("chain_name", ["dept_chain", "unguarded_dept_chain"])
    def test_verdicts_match_full_exploration(self, chain_name, dept_scope, monkeypatch, request):
        """Test reduced and full exploration agree on every verdict"""
        chain = request.getfixturevalue(chain_name)

        reduced = check(chain, dept_scope)
        monkeypatch.setenv("UBDB_SYMMETRY", "0")
        full = check(chain, dept_scope)

        assert [(r.obligation.key, r.verdict) for r in reduced] == [(r.obligation.key, r.verdict) for r in full]
        assert reduced[0].states_explored < full[0].states_explored

    def test_reduced_traces_replay(self, unguarded_dept_chain):
        """Test every counterexample found under reduction replays on the set engine"""
        machine = unguarded_dept_chain.machine("Dept")
        scope = Scope.for_chain(unguarded_dept_chain, {"PERSON": 3, "DEPARTMENT": 3})

        exploration = explore(machine, scope, symmetry=True)

        assert exploration.violations
        for trace, _ in exploration.violations.values():
            states = replay_trace(trace, machine, scope)
            assert states[-1] == trace.final_state

    def test_reachable_states_are_not_reduced(self, dept_chain, dept_scope):
        """Test the reachable set keeps every renaming"""
        machine = dept_chain.machine("Dept")

        reduced = explore(machine, dept_scope, symmetry=True)
        full = explore(machine, dept_scope, symmetry=False)

        assert reduced.states < full.states
        assert reduced.fired == full.fired
        assert len(reachable_states(machine, dept_scope)) == full.states


class TestAsyncCheck:
    """Tests for concurrent machine checking"""

    @pytest.mark.asyncio
    async def test_chain_order_kept(self, refinement_chain, refinement_scope):
        """Test merged reports follow chain order whatever finishes first"""
        serial = check(refinement_chain, refinement_scope)

        parallel = await check_machines_async(refinement_chain, refinement_scope, max_concurrent=2)

        assert [r.obligation.key for r in parallel] == [r.obligation.key for r in serial]
        assert [r.verdict for r in parallel] == [r.verdict for r in serial]

    @pytest.mark.asyncio
    async def test_selected_machines(self, refinement_chain, refinement_scope):
        """Test checking a subset of machines"""
        reports = await check_machines_async(refinement_chain, refinement_scope, machines=["Conc"])

        assert {r.obligation.machine for r in reports} == {"Conc"}


class TestTraces:
    """Tests for trace replay and trace records"""

    def test_records_round_trip(self, unguarded_dept_chain, unguarded_scope):
        """Test a counterexample survives conversion to records and back"""
        machine = unguarded_dept_chain.machine("Dept")
        trace = _report(check(unguarded_dept_chain, unguarded_scope), INV, "setDean", "inv_dean").counterexample

        records = trace.as_records()
        again = trace_from_records(json.loads(json.dumps(records)), machine, unguarded_scope)

        assert records[0] == {"event": "addDepartment", "binding": {"this_d": "DEPARTMENT.1"}}
        assert [s.describe() for s in again] == [s.describe() for s in trace]
        assert replay_trace(again, machine, unguarded_scope)[-1] == trace.final_state

    def test_disabled_step(self, dept_chain, dept_scope):
        """Test replay stops at a step whose guard is false"""
        machine = dept_chain.machine("Dept")
        trace = Trace(
            "Dept",
            (TraceStep.of("setDean", {"d": Atom("DEPARTMENT", 1), "s": Atom("PERSON", 1)}),),
        )

        with pytest.raises(TraceReplayError) as exc_info:
            replay_trace(trace, machine, dept_scope)

        assert exc_info.value.step == 1
        assert "is not enabled" in exc_info.value.message

    def test_unknown_event(self, dept_chain, dept_scope):
        """Test replay rejects events the machine does not have"""
        trace = Trace("Dept", (TraceStep.of("fire", {}),))

        with pytest.raises(TraceReplayError, match="has no event 'fire'"):
            replay_trace(trace, dept_chain.machine("Dept"), dept_scope)

    def test_record_without_event(self, dept_chain, dept_scope):
        """Test malformed trace records"""
        with pytest.raises(TraceReplayError):
            trace_from_records([{"binding": {}}], dept_chain.machine("Dept"), dept_scope)


class TestReports:
    """Tests for report rendering"""

    def test_violated_needs_counterexample(self):
        """Test the verdict/counterexample pairing is enforced"""
        obligation = ProofObligation(INV, "M", "e", "i")

        with pytest.raises(ValueError):
            CheckReport(obligation, VIOLATED)
        with pytest.raises(ValueError):
            CheckReport(obligation, HOLDS, counterexample=Trace("M"))
        with pytest.raises(ValueError):
            CheckReport(obligation, "unknown")

    def test_render_text(self, unguarded_dept_chain, unguarded_scope):
        """Test verdict lines, trace lines and the summary"""
        reports = check(unguarded_dept_chain, unguarded_scope)

        text = render_text(reports, color=False, scope=unguarded_scope)

        lines = text.splitlines()
        violated = next(i for i, line in enumerate(lines) if line.startswith("VIOLATED INV Dept/setDean/inv_dean"))
        assert lines[violated + 1] == "    1. addDepartment(this_d = DEPARTMENT.1)"
        assert lines[violated + 4] == "    4. setDean(d = DEPARTMENT.2, s = PERSON.1)"
        assert lines[-1] == "12 obligation(s): 11 holds, 1 violated, 0 scope-exhausted (scope DEPARTMENT=2, PERSON=2)"
        assert "\033[" not in text

    def test_render_text_color(self, dept_chain, dept_scope):
        """Test ANSI colour on verdicts when enabled"""
        text = render_text(check(dept_chain, dept_scope), color=True)

        assert "\033[32mHOLDS\033[0m" in text

    def test_empty_trace_line(self, dept_chain):
        """Test never-enabled events print an explicit empty trace"""
        scope = Scope.for_chain(dept_chain, {"PERSON": 0, "DEPARTMENT": 1})

        text = render_text(check(dept_chain, scope), color=False)

        assert "    trace: (empty)" in text
        assert "    note: never enabled in a reachable state" in text

    def test_summarize(self, unguarded_dept_chain, unguarded_scope):
        """Test verdict counts"""
        counts = summarize(check(unguarded_dept_chain, unguarded_scope))

        assert counts == {HOLDS: 11, VIOLATED: 1, SCOPE_EXHAUSTED: 0}

    def test_structured_report(self, unguarded_dept_chain, unguarded_scope):
        """Test the structured report is JSON carrying traces for violations"""
        reports = check(unguarded_dept_chain, unguarded_scope)

        data = json.loads(render_structured(run_result("check", reports, unguarded_scope, exit_status=1)))

        assert data["command"] == "check"
        assert data["scope"] == {"DEPARTMENT": 2, "PERSON": 2}
        assert data["exit_status"] == 1
        violated = [r for r in data["reports"] if r["verdict"] == VIOLATED]
        assert len(violated) == 1
        assert violated[0]["kind"] == INV
        assert violated[0]["invariant"] == "inv_dean"
        assert violated[0]["trace"][-1] == {
            "event": "setDean",
            "binding": {"d": "DEPARTMENT.2", "s": "PERSON.1"},
        }

    def test_report_record_without_trace(self, dept_chain, dept_scope):
        """Test holds verdicts carry no trace"""
        record = ReportRecord.from_report(check(dept_chain, dept_scope)[0])

        assert record.trace is None
        assert record.verdict == HOLDS
        assert record.machine == "Dept"
