"""
Command-line interface

`ubdb check|lint|refine-check|generate|animate|fmt|diagram PATH...`

Exit status: 0 when everything holds, 1 on violations or error findings,
2 on usage, parse and model errors.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, TextIO, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ubdb.checker import (
    HOLDS,
    CheckReport,
    ReportRecord,
    RunResult,
    Trace,
    check,
    check_machines_async,
    render_structured,
    render_text,
    replay_trace,
    trace_from_records,
)
from ubdb.checker.runner import check_refinement_step
from ubdb.config import SQL_DIALECTS, color_enabled, get_bundled_model, get_worker_count
from ubdb.engine.evaluator import Evaluator
from ubdb.engine.values import Scope, State, format_value
from ubdb.exceptions import (
    ConfigurationError,
    EvaluationError,
    ModelError,
    ParseError,
    PatternError,
    SqlGenError,
    TraceReplayError,
    UbdbError,
    UsageError,
)
from ubdb.model.chain import ResolvedChain, ResolvedMachine
from ubdb.model.resolve import resolve
from ubdb.model.typecheck import has_errors as has_type_errors
from ubdb.model.typecheck import typecheck
from ubdb.parser import parse_files, pretty_print
from ubdb.patterns import has_errors, lint_chain, render_findings
from ubdb.sqlgen import emit, generate_sql
from ubdb.utils.error_helper import format_error_response
from ubdb.utils.logger import get_logger, set_log_level
from ubdb.version import __version__

logger = get_logger()

COMMANDS = ("check", "lint", "refine-check", "generate", "animate", "fmt", "diagram")
REPORT_FORMATS = ("text", "structured")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

# Input that cannot be processed, as opposed to a model that fails its checks
_USAGE_ERRORS = (ParseError, ModelError, UsageError, ConfigurationError, SqlGenError, PatternError)


class RunConfig(BaseModel):
    """One invocation of the command-line tool"""

    model_config = ConfigDict(frozen=True)

    command: Literal["check", "lint", "refine-check", "generate", "animate", "fmt", "diagram"]
    paths: List[Path] = Field(min_length=1)
    scope: Dict[str, int] = Field(default_factory=dict)
    budget: Optional[int] = Field(default=None, ge=1)
    report_format: Literal["text", "structured"] = "text"
    out: Optional[Path] = None
    force: bool = False
    machine: Optional[str] = None
    workers: Optional[int] = Field(default=None, ge=1)
    dialect: Optional[Literal["ansi", "sqlite"]] = None
    trace: Optional[Path] = None
    strict: bool = False
    verbose: bool = False

    @field_validator("scope")
    @classmethod
    def _non_negative(cls, value: Dict[str, int]) -> Dict[str, int]:
        for name, count in value.items():
            if count < 0:
                raise ValueError(f"scope bound for {name} must be >= 0, got {count}")
        return value

    @property
    def structured(self) -> bool:
        return self.report_format == "structured"


def _source_paths(paths: List[Path]) -> List[Path]:
    """Existing files as given; otherwise a bundled model of that name"""
    resolved = []
    for path in paths:
        if not path.exists():
            bundled = get_bundled_model(str(path))
            if bundled.exists():
                logger.debug(f"Using bundled model {bundled}")
                path = bundled
        resolved.append(path)
    return resolved


class CommandRunner:
    """Runs one RunConfig, collecting the structured result as it goes"""

    def __init__(self, config: RunConfig, stdout: TextIO, stderr: TextIO):
        self.config = config
        self.stdout = stdout
        self.stderr = stderr
        self.result = RunResult(command=config.command)
        self.scope: Optional[Scope] = None

    # --- output -------------------------------------------------------------

    def warn(self, text: str) -> None:
        self.stderr.write(text.rstrip("\n") + "\n")

    def report(self, text: str) -> None:
        """Text reports go to --out when given, stdout otherwise"""
        if self.config.structured:
            return
        if self.config.out is not None and self.config.command not in ("generate", "fmt", "diagram"):
            self._write_file(self.config.out, text)
            return
        self.stdout.write(text)

    def _write_file(self, path: Path, text: str) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(text)
        except OSError as e:
            raise UsageError(f"Cannot write {path}: {e}", details={"path": str(path)}) from e
        self.result.outputs.append(str(path))

    def fail(self, error: Exception) -> None:
        if isinstance(error, ParseError) and error.diagnostics:
            for diagnostic in error.diagnostics:
                self.warn(str(diagnostic))
        else:
            message = error.message if isinstance(error, UbdbError) else str(error)
            self.warn(f"error: {message}")
            for line in error.details.get("diagnostics", []) if isinstance(error, UbdbError) else []:
                self.warn(f"  {line}")
        if isinstance(error, UbdbError):
            for suggestion in error.suggestions:
                self.warn(f"  hint: {suggestion}")
        self.result.diagnostics.append(format_error_response(error, {"command": self.config.command}))

    def finish(self, status: int) -> None:
        self.result.exit_status = status
        if not self.config.structured:
            return
        text = render_structured(self.result)
        if self.config.out is not None and self.config.command not in ("generate", "fmt", "diagram"):
            self._write_file(self.config.out, text)
        else:
            self.stdout.write(text)

    # --- loading ------------------------------------------------------------

    def parse(self):
        chain, diagnostics = parse_files(_source_paths(self.config.paths), workers=get_worker_count(self.config.workers))
        if chain is None:
            raise ParseError(f"{len([d for d in diagnostics if d.is_error])} parse error(s)", diagnostics=diagnostics)
        for diagnostic in diagnostics:
            self.warn(str(diagnostic))
        return chain

    def load(self) -> ResolvedChain:
        resolved = resolve(self.parse())
        diagnostics = typecheck(resolved)
        if has_type_errors(diagnostics):
            raise ModelError(
                f"{sum(1 for d in diagnostics if d.severity == 'error')} type error(s)",
                details={"diagnostics": [str(d) for d in diagnostics]},
                suggestions=["Declare every name before use and keep typings to carrier sets and classes"],
            )
        for diagnostic in diagnostics:
            self.warn(str(diagnostic))
        self.scope = self._scope(resolved)
        self.result.scope = self.scope.as_dict()
        return resolved

    def _scope(self, resolved: ResolvedChain) -> Scope:
        known = {c for m in resolved.machines for c in m.carriers}
        unknown = sorted(set(self.config.scope) - known)
        if unknown:
            raise UsageError(
                f"--scope names unknown carrier set(s): {', '.join(unknown)}",
                details={"carriers": sorted(known)},
            )
        return Scope.for_chain(resolved, self.config.scope)

    def target_machine(self, resolved: ResolvedChain, default: Optional[str] = None) -> ResolvedMachine:
        name = self.config.machine or default
        machine = resolved.machine(name) if name else resolved.last
        if machine is None:
            raise UsageError(
                f"No machine named '{name}'" if name else "The model has no machine",
                details={"machines": [m.name for m in resolved.machines]},
                suggestions=["Pass one of the machine names with --machine"],
            )
        return machine

    # --- commands -----------------------------------------------------------

    def execute(self) -> int:
        handler = getattr(self, f"cmd_{self.config.command.replace('-', '_')}")
        return handler()

    def _verdicts(self, reports: List[CheckReport]) -> int:
        self.result.reports.extend(ReportRecord.from_report(r) for r in reports)
        self.report(render_text(reports, color=color_enabled(self.stdout), scope=self.scope))
        return EXIT_OK if all(r.verdict == HOLDS for r in reports) else EXIT_FAILED

    def _check_machines(self, resolved: ResolvedChain, names: Optional[List[str]] = None) -> List[CheckReport]:
        workers = get_worker_count(self.config.workers)
        if workers > 1:
            return asyncio.run(
                check_machines_async(resolved, self.scope, names, self.config.budget, max_concurrent=workers)
            )
        if names is None:
            return check(resolved, self.scope, budget=self.config.budget)
        reports: List[CheckReport] = []
        for name in names:
            reports.extend(check(resolved, self.scope, machine=name, budget=self.config.budget))
        return reports

    def cmd_check(self) -> int:
        resolved = self.load()
        names = [self.target_machine(resolved).name] if self.config.machine else None
        return self._verdicts(self._check_machines(resolved, names))

    def cmd_refine_check(self) -> int:
        resolved = self.load()
        steps = resolved.refinement_steps()
        if self.config.machine:
            concrete = self.target_machine(resolved)
            steps = [(a, c) for a, c in steps if c.name == concrete.name]
            if not steps:
                raise UsageError(f"'{concrete.name}' does not refine another machine")
        if not steps:
            self.warn("note: the chain has no refinement step")
        return self._verdicts(self._refine_steps(steps))

    def _refine_steps(self, steps) -> List[CheckReport]:
        reports: List[CheckReport] = []
        for abstract, concrete in steps:
            reports.extend(check_refinement_step(abstract, concrete, self.scope, self.config.budget))
        return reports

    def cmd_lint(self) -> int:
        findings = lint_chain(self.load())
        self.result.findings.extend(f.model_dump() for f in findings)
        self.report(render_findings(findings))
        return EXIT_FAILED if has_errors(findings, strict=self.config.strict) else EXIT_OK

    def cmd_generate(self) -> int:
        resolved = self.load()
        target = self.target_machine(resolved)
        if self.config.force:
            self.warn("warning: --force: generating without verification")
            verified = False
        else:
            reports = self._verification(resolved, target)
            self.result.reports.extend(ReportRecord.from_report(r) for r in reports)
            failing = [r for r in reports if r.verdict != HOLDS]
            if failing:
                self.warn(
                    f"generate refused: {len(failing)} obligation(s) do not hold at scope {self.scope} "
                    "(re-run with --force to generate anyway)"
                )
                if not self.config.structured:
                    self.stderr.write(render_text(failing, color=color_enabled(self.stderr)))
                return EXIT_FAILED
            verified = True

        script = generate_sql(
            resolved,
            dialect=self.config.dialect,
            machine=target.name,
            scope=self.scope.as_dict(),
            verified=verified,
            forced=self.config.force,
        )
        for note in script.notes:
            logger.info(f"generate: {note.element}: {note.enforcement}")
        if self.config.out is not None:
            paths = emit(script, self.config.out)
            self.result.outputs.extend(str(p) for p in paths if p is not None)
            if not self.config.structured:
                self.stdout.write(f"wrote {', '.join(self.result.outputs)}\n")
        elif self.config.structured:
            self.result.text = script.text()
        else:
            self.stdout.write(script.text())
        return EXIT_OK

    def _verification(self, resolved: ResolvedChain, target: ResolvedMachine) -> List[CheckReport]:
        """check and refine-check over the chain up to the generated machine"""
        names = [m.name for m in resolved.machines]
        prefix = names[: names.index(target.name) + 1]
        reports = self._check_machines(resolved, prefix)
        reports.extend(self._refine_steps([(a, c) for a, c in resolved.refinement_steps() if c.name in prefix]))
        return reports

    def cmd_fmt(self) -> int:
        text = pretty_print(self.parse())
        if self.config.out is not None:
            self._write_file(self.config.out, text)
        elif self.config.structured:
            self.result.text = text
        else:
            self.stdout.write(text)
        return EXIT_OK

    def cmd_diagram(self) -> int:
        from ubdb.tools.class_diagram import HAS_MATPLOTLIB, render_class_diagram

        if not HAS_MATPLOTLIB:
            raise ConfigurationError(
                "matplotlib is not installed",
                suggestions=["pip install matplotlib"],
            )
        machine = self.target_machine(self.load())
        out = self.config.out or Path(f"{machine.name}.png")
        out.parent.mkdir(parents=True, exist_ok=True)
        render_class_diagram(machine, out)
        if not out.exists():
            raise UsageError(f"Could not render the class diagram of {machine.name}")
        self.result.outputs.append(str(out))
        if not self.config.structured:
            self.stdout.write(f"wrote {out}\n")
        return EXIT_OK

    def cmd_animate(self) -> int:
        if self.config.trace is None:
            raise UsageError("animate needs a trace file", suggestions=["Pass --trace FILE"])
        resolved = self.load()
        records, recorded_machine = _read_trace_file(self.config.trace)
        machine = self.target_machine(resolved, recorded_machine)
        trace = trace_from_records(records, machine, self.scope)
        return self._animate(machine, trace)

    def _animate(self, machine: ResolvedMachine, trace: Trace) -> int:
        evaluator = Evaluator.for_machine(machine, self.scope)
        failure: Optional[TraceReplayError] = None
        try:
            states = replay_trace(trace, machine, self.scope)
        except TraceReplayError as e:
            failure = e
            states = replay_trace(Trace(machine.name, trace.steps[: max(0, (e.step or 1) - 1)]), machine, self.scope)

        lines = [f"animate {machine.name}: {len(trace)} step(s), scope {self.scope}"]
        initial = State.empty(machine.variable_names)
        violated_any = False
        for index, state in enumerate([initial] + states):
            title = "initial" if index == 0 else f"{index}. {trace.steps[index - 1].describe()}"
            violated = _violated_invariants(evaluator, machine, state)
            violated_any = violated_any or bool(violated)
            lines.append(title)
            lines.extend(f"    {name} = {format_value(value)}" for name, value in state.items())
            if violated:
                lines.append(f"    violates {', '.join(violated)}")
            record = {
                "step": str(index),
                "event": "" if index == 0 else trace.steps[index - 1].event,
                "state": state.as_text(),
            }
            if violated:
                record["violates"] = ", ".join(violated)
            self.result.states.append(record)
        if failure is not None:
            lines.append(f"stopped: {failure.message}")
            self.result.diagnostics.append(format_error_response(failure, {"command": "animate"}))
        self.report("\n".join(lines) + "\n")
        return EXIT_FAILED if failure is not None or violated_any else EXIT_OK


def _violated_invariants(evaluator: Evaluator, machine: ResolvedMachine, state: State) -> List[str]:
    violated = []
    for invariant in machine.invariants:
        try:
            holds = evaluator.holds(invariant.predicate, state)
        except EvaluationError:
            holds = False
        if not holds:
            violated.append(invariant.label)
    return violated


def _read_trace_file(path: Path) -> Tuple[List[Dict[str, Any]], Optional[str]]:
    """
    Steps of a trace file and the machine it names, if any.

    Accepts a bare list of {event, binding} records, an object with a `trace`
    list, or a structured report (the first report carrying a trace).
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise UsageError(f"Cannot read trace file {path}: {e.strerror or e}") from e
    except (ValueError, UnicodeDecodeError) as e:
        raise UsageError(f"Trace file {path} is not valid JSON: {e}") from e

    if isinstance(data, list):
        return data, None
    if isinstance(data, dict):
        if isinstance(data.get("trace"), list):
            return data["trace"], data.get("machine")
        for report in data.get("reports") or []:
            if isinstance(report, dict) and report.get("trace"):
                return report["trace"], report.get("machine")
    raise UsageError(
        f"Trace file {path} has no trace",
        suggestions=["Use the structured output of 'ubdb check --format structured' or a list of {event, binding}"],
    )


def run(config: RunConfig, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """
    Execute one command.

    Reports go to stdout (or --out), diagnostics to stderr; with the structured
    format stdout carries a single RunResult JSON document.

    Returns:
        Exit status: 0 all holds, 1 violations or error findings, 2 usage/parse/model errors
    """
    runner = CommandRunner(config, stdout or sys.stdout, stderr or sys.stderr)
    try:
        status = runner.execute()
    except _USAGE_ERRORS as e:
        logger.debug(f"{config.command}: {type(e).__name__}: {e}")
        runner.fail(e)
        status = EXIT_USAGE
    except UbdbError as e:
        logger.debug(f"{config.command}: {type(e).__name__}: {e}")
        runner.fail(e)
        status = EXIT_FAILED
    except OSError as e:
        runner.fail(e)
        status = EXIT_USAGE
    try:
        runner.finish(status)
    except UsageError as e:
        runner.warn(f"error: {e.message}")
        status = EXIT_USAGE
    logger.info(f"{config.command}: exit status {status}")
    return status


def _scope_item(text: str) -> Tuple[str, int]:
    name, sep, count = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected SET=N, got {text!r}")
    try:
        value = int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bound for {name} is not an integer: {count!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"bound for {name} must be >= 0")
    return name.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ubdb",
        description="Check layered database models by small-scope exploration and generate SQL from them",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("paths", nargs="+", type=Path, metavar="PATH", help=".ubdb files or bundled model names")
    parser.add_argument(
        "--scope",
        action="append",
        type=_scope_item,
        default=[],
        metavar="SET=N",
        help="Instance bound for a carrier set (repeatable)",
    )
    parser.add_argument("--budget", type=int, help="Maximum number of states explored per machine")
    parser.add_argument("--format", dest="report_format", choices=REPORT_FORMATS, default="text")
    parser.add_argument("--out", type=Path, help="Output file (report, SQL script, formatted model or PNG)")
    parser.add_argument("--force", action="store_true", help="generate: skip verification (stamped into the manifest)")
    parser.add_argument("--machine", help="Machine to work on (default: every machine, or the most concrete one)")
    parser.add_argument("--workers", type=int, help="Machines checked concurrently")
    parser.add_argument("--dialect", choices=SQL_DIALECTS, help="generate: SQL dialect")
    parser.add_argument("--trace", type=Path, help="animate: trace file (structured report or step list)")
    parser.add_argument("--strict", action="store_true", help="lint: warnings count as errors")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging on stderr")
    return parser


def main(argv: Optional[List[str]] = None, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    if args.verbose:
        set_log_level(logging.DEBUG)

    try:
        config = RunConfig(
            command=args.command,
            paths=args.paths,
            scope=dict(args.scope),
            budget=args.budget,
            report_format=args.report_format,
            out=args.out,
            force=args.force,
            machine=args.machine,
            workers=args.workers,
            dialect=args.dialect,
            trace=args.trace,
            strict=args.strict,
            verbose=args.verbose,
        )
    except ValidationError as e:
        for error in e.errors():
            where = ".".join(str(part) for part in error["loc"])
            stderr.write(f"ubdb: error: {where}: {error['msg']}\n")
        return EXIT_USAGE

    return run(config, stdout, stderr)


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
