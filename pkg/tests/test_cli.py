"""
Tests for the ubdb command-line interface

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import io
import json

import pytest

from ubdb.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, RunConfig, build_parser, main


def _run(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    status = main([str(a) for a in argv], stdout=stdout, stderr=stderr)
    return status, stdout.getvalue(), stderr.getvalue()


@pytest.fixture
def dept_file(model_file, dept_text):
    return model_file(dept_text, "dept.ubdb")


@pytest.fixture
def unguarded_file(model_file, unguarded_dept_text):
    return model_file(unguarded_dept_text, "unguarded.ubdb")


class TestCheckCommand:
    """Tests for ubdb check"""

    def test_all_hold(self, dept_file):
        """Test exit 0 and the summary line"""
        status, out, _ = _run("check", dept_file, "--scope", "PERSON=2", "--scope", "DEPARTMENT=2")

        assert status == EXIT_OK
        assert out.splitlines()[-1] == (
            "12 obligation(s): 12 holds, 0 violated, 0 scope-exhausted (scope DEPARTMENT=2, PERSON=2)"
        )

    def test_default_scope(self, dept_file):
        """Test classes default to two instances"""
        status, out, _ = _run("check", dept_file)

        assert status == EXIT_OK
        assert "(scope DEPARTMENT=2, PERSON=2)" in out

    def test_violation(self, unguarded_file):
        """Test exit 1 with the violated obligation and its trace"""
        status, out, _ = _run("check", unguarded_file)

        assert status == EXIT_FAILED
        assert "VIOLATED INV Dept/setDean/inv_dean" in out
        assert "    4. setDean(d = DEPARTMENT.2, s = PERSON.1)" in out

    def test_structured_report(self, unguarded_file):
        """Test the structured format is one JSON document"""
        status, out, _ = _run("check", unguarded_file, "--format", "structured")

        data = json.loads(out)
        assert status == EXIT_FAILED
        assert data["command"] == "check"
        assert data["exit_status"] == EXIT_FAILED
        assert data["scope"] == {"DEPARTMENT": 2, "PERSON": 2}
        violated = [r for r in data["reports"] if r["verdict"] == "violated"]
        assert [(r["event"], r["invariant"]) for r in violated] == [("setDean", "inv_dean")]

    def test_report_to_file(self, dept_file, tmp_path):
        """Test --out redirects the text report"""
        out_file = tmp_path / "reports" / "check.txt"

        status, out, _ = _run("check", dept_file, "--out", out_file)

        assert status == EXIT_OK
        assert out == ""
        assert out_file.read_text().endswith("(scope DEPARTMENT=2, PERSON=2)\n")

    def test_single_machine(self, model_file, refinement_text):
        """Test --machine limits checking to one machine"""
        path = model_file(refinement_text)

        status, out, _ = _run("check", path, "--machine", "Abs", "--format", "structured")

        assert status == EXIT_OK
        assert {r["machine"] for r in json.loads(out)["reports"]} == {"Abs"}

    def test_parallel_workers(self, model_file, refinement_text):
        """Test --workers gives the same verdicts as a serial run"""
        path = model_file(refinement_text)

        serial = _run("check", path, "--format", "structured")
        parallel = _run("check", path, "--format", "structured", "--workers", "2")

        def verdicts(out):
            return [(r["kind"], r["machine"], r["event"], r["invariant"], r["verdict"]) for r in json.loads(out)["reports"]]

        assert serial[0] == parallel[0] == EXIT_OK
        assert verdicts(serial[1]) == verdicts(parallel[1])

    def test_budget_exhaustion_fails(self, dept_file):
        """Test a scope-exhausted verdict does not count as holding"""
        status, out, _ = _run("check", dept_file, "--budget", "2")

        assert status == EXIT_FAILED
        assert "SCOPE-EXHAUSTED" in out


class TestUsageErrors:
    """Tests for exit status 2"""

    def test_parse_error(self, model_file):
        """Test parse diagnostics go to stderr with file and line"""
        path = model_file("context C\n  sets A ?\nend\n", "bad.ubdb")

        status, out, err = _run("check", path)

        assert status == EXIT_USAGE
        assert out == ""
        assert f"{path}:2:" in err
        assert "unexpected character" in err

    def test_parse_error_structured(self, model_file):
        """Test structured output still carries a RunResult on failure"""
        path = model_file("machine", "bad.ubdb")

        status, out, _ = _run("check", path, "--format", "structured")

        data = json.loads(out)
        assert status == EXIT_USAGE
        assert data["exit_status"] == EXIT_USAGE
        assert data["diagnostics"][0]["error_code"] == "PARSE_ERROR"

    def test_missing_file(self, tmp_path):
        """Test a path that is neither a file nor a bundled model"""
        status, _, err = _run("check", tmp_path / "missing.ubdb")

        assert status == EXIT_USAGE
        assert "cannot read file" in err

    def test_model_error(self, dept_text, model_file):
        """Test an unresolved name"""
        path = model_file(dept_text.replace("worksIn(s) = d", "worksAt(s) = d"))

        status, _, err = _run("check", path)

        assert status == EXIT_USAGE
        assert "worksAt" in err

    def test_type_error(self, dept_text, model_file):
        """Test type errors stop the run before checking"""
        path = model_file(dept_text.replace("hasDean <+ {d |-> s}", "hasDean <+ {s |-> d}"))

        status, _, err = _run("check", path)

        assert status == EXIT_USAGE
        assert "type error(s)" in err
        assert "Dept/setDean/act1" in err

    def test_unknown_scope_carrier(self, dept_file):
        """Test --scope naming a set the model lacks"""
        status, _, err = _run("check", dept_file, "--scope", "NOPE=1")

        assert status == EXIT_USAGE
        assert "unknown carrier set(s): NOPE" in err

    @pytest.mark.parametrize("item", ["PERSON", "PERSON=x", "PERSON=-1", "=2"])
    def test_malformed_scope(self, dept_file, item):
        """Test --scope values that are not SET=N"""
        status, _, _ = _run("check", dept_file, "--scope", item)

        assert status == EXIT_USAGE

    def test_unknown_command(self, dept_file):
        """Test a command outside the command set"""
        status, _, _ = _run("prove", dept_file)

        assert status == EXIT_USAGE

    def test_invalid_budget(self, dept_file):
        """Test option validation"""
        status, _, err = _run("check", dept_file, "--budget", "0")

        assert status == EXIT_USAGE
        assert "budget" in err

    def test_unknown_machine(self, dept_file):
        """Test --machine naming a missing machine"""
        status, _, err = _run("check", dept_file, "--machine", "Nope")

        assert status == EXIT_USAGE
        assert "Nope" in err

    def test_version(self):
        """Test --version exits cleanly"""
        status, _, _ = _run("--version")

        assert status == EXIT_OK


class TestGenerateCommand:
    """Tests for ubdb generate"""

    def test_refused_on_violation(self, unguarded_file):
        """Test generation is refused while an obligation fails"""
        status, out, err = _run("generate", unguarded_file)

        assert status == EXIT_FAILED
        assert out == ""
        assert "generate refused: 1 obligation(s) do not hold" in err
        assert "VIOLATED INV Dept/setDean/inv_dean" in err

    def test_forced(self, unguarded_file):
        """Test --force generates anyway and says so"""
        status, out, err = _run("generate", unguarded_file, "--force")

        assert status == EXIT_OK
        assert out.startswith("-- Generated by ubdb ")
        assert "--force" in err

    def test_writes_script_and_manifest(self, dept_file, tmp_path):
        """Test --out writes the script and a verified manifest"""
        target = tmp_path / "sql" / "dept.sql"

        status, out, _ = _run("generate", dept_file, "--out", target, "--dialect", "sqlite")

        manifest = json.loads((tmp_path / "sql" / "dept.manifest.json").read_text())
        assert status == EXIT_OK
        assert out.startswith("wrote ")
        assert target.read_text().startswith("-- Generated by ubdb ")
        assert manifest["verified"] is True
        assert manifest["forced"] is False
        assert manifest["dialect"] == "sqlite"
        assert manifest["scope"] == {"DEPARTMENT": 2, "PERSON": 2}

    def test_forced_manifest(self, unguarded_file, tmp_path):
        """Test a forced manifest is stamped unverified"""
        target = tmp_path / "dept.sql"

        _run("generate", unguarded_file, "--force", "--out", target)

        manifest = json.loads((tmp_path / "dept.manifest.json").read_text())
        assert manifest["verified"] is False
        assert manifest["forced"] is True

    def test_bundled_model_name(self):
        """Test a bundled model can be named instead of a path"""
        status, out, _ = _run(
            "generate", "relation", "--scope", "A_SET=1", "--scope", "B_SET=2", "--scope", "X_VALUE=1"
        )

        assert status == EXIT_OK
        assert "CREATE PROCEDURE link(" in out

    def test_query_with_actions(self, dept_text, model_file):
        """Test a query event that assigns is rejected before generation"""
        path = model_file(dept_text.replace("event setDean", "event setDean query"))

        status, _, _ = _run("generate", path, "--force")

        assert status == EXIT_USAGE


class TestOtherCommands:
    """Tests for lint, refine-check, fmt and animate"""

    def test_lint_bundled(self):
        """Test lint on a bundled model"""
        status, out, _ = _run("lint", "relation")

        assert status == EXIT_OK
        assert "INFO layer-sequence chain: structure" in out

    def test_lint_strict(self, model_file):
        """Test --strict fails on warnings"""
        text = (
            "context C\n  sets P D\nend\n\nmachine M\n  sees C\n  layer structure\n"
            "  class Person : P kind primary\n  class Reg : D kind secondary\nend\n"
        )
        path = model_file(text)

        assert _run("lint", path)[0] == EXIT_OK
        assert _run("lint", path, "--strict")[0] == EXIT_FAILED

    def test_refine_check(self, model_file, refinement_text):
        """Test refine-check passes a sound extension"""
        status, out, _ = _run("refine-check", model_file(refinement_text))

        assert status == EXIT_OK
        assert "HOLDS GRD Conc/addA states=" in out
        assert "abstract=Abs" in out

    def test_refine_check_weak_guard(self, model_file, weak_refinement_text):
        """Test refine-check fails a weakened guard"""
        status, out, _ = _run("refine-check", model_file(weak_refinement_text))

        assert status == EXIT_FAILED
        assert "VIOLATED GRD Weak/addA" in out

    def test_refine_check_without_steps(self, dept_file):
        """Test a single-machine chain has nothing to refine-check"""
        status, _, err = _run("refine-check", dept_file)

        assert status == EXIT_OK
        assert "no refinement step" in err

    def test_fmt_is_idempotent(self, model_file, dept_text, tmp_path):
        """Test formatting formatted output changes nothing"""
        once = tmp_path / "once.ubdb"
        twice = tmp_path / "twice.ubdb"

        assert _run("fmt", model_file("// note\n" + dept_text), "--out", once)[0] == EXIT_OK
        assert _run("fmt", once, "--out", twice)[0] == EXIT_OK

        assert once.read_bytes() == twice.read_bytes()
        assert b"// note" not in once.read_bytes()

    def test_animate_counterexample(self, unguarded_file, tmp_path):
        """Test a structured report replays as an animation ending in a violation"""
        report = tmp_path / "report.json"
        _run("check", unguarded_file, "--format", "structured", "--out", report)

        status, out, _ = _run("animate", unguarded_file, "--trace", report)

        assert status == EXIT_FAILED
        assert out.startswith("animate Dept: 4 step(s)")
        assert "4. setDean(d = DEPARTMENT.2, s = PERSON.1)" in out
        assert "    violates inv_dean" in out

    def test_animate_step_list(self, dept_file, tmp_path):
        """Test a plain list of steps that stays within the invariants"""
        trace = tmp_path / "trace.json"
        trace.write_text(
            json.dumps(
                [
                    {"event": "addDepartment", "binding": {"this_d": "DEPARTMENT.1"}},
                    {"event": "addStaff", "binding": {"this_s": "PERSON.1", "d": "DEPARTMENT.1"}},
                    {"event": "setDean", "binding": {"d": "DEPARTMENT.1", "s": "PERSON.1"}},
                ]
            )
        )

        status, out, _ = _run("animate", dept_file, "--trace", trace)

        assert status == EXIT_OK
        assert "    hasDean = {DEPARTMENT.1 |-> PERSON.1}" in out
        assert "violates" not in out

    def test_animate_disabled_step(self, dept_file, tmp_path):
        """Test animation stops at a step whose guard is false"""
        trace = tmp_path / "trace.json"
        trace.write_text(json.dumps([{"event": "setDean", "binding": {"d": "DEPARTMENT.1", "s": "PERSON.1"}}]))

        status, out, _ = _run("animate", dept_file, "--trace", trace)

        assert status == EXIT_FAILED
        assert "stopped: step 1:" in out

    def test_animate_needs_trace(self, dept_file):
        """Test animate without --trace"""
        assert _run("animate", dept_file)[0] == EXIT_USAGE

    def test_animate_invalid_json(self, dept_file, tmp_path):
        """Test an unreadable trace file"""
        trace = tmp_path / "trace.json"
        trace.write_text("{not json")

        status, _, err = _run("animate", dept_file, "--trace", trace)

        assert status == EXIT_USAGE
        assert "not valid JSON" in err


class TestRunConfig:
    """Tests for option validation"""

    def test_negative_scope_rejected(self, tmp_path):
        """Test negative bounds fail validation"""
        with pytest.raises(ValueError):
            RunConfig(command="check", paths=[tmp_path], scope={"A": -1})

    def test_paths_required(self):
        """Test at least one path"""
        with pytest.raises(ValueError):
            RunConfig(command="check", paths=[])

    def test_parser_defaults(self):
        """Test the parser fills in the documented defaults"""
        args = build_parser().parse_args(["check", "model.ubdb"])

        assert args.report_format == "text"
        assert args.scope == []
        assert not args.force
