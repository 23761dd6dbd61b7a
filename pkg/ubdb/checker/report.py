"""
Check reports and their text / structured renderings

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from ubdb.checker.obligations import ProofObligation
from ubdb.checker.trace import Trace, steps_text
from ubdb.config import color_enabled
from ubdb.engine.values import Scope

HOLDS = "holds"
VIOLATED = "violated"
SCOPE_EXHAUSTED = "scope-exhausted"

VERDICTS = (HOLDS, VIOLATED, SCOPE_EXHAUSTED)

BY_CONSTRUCTION = "holds by construction"

_COLORS = {HOLDS: "\033[32m", VIOLATED: "\033[31m", SCOPE_EXHAUSTED: "\033[33m"}
_RESET = "\033[0m"


@dataclass(frozen=True)
class CheckReport:
    """Verdict on one obligation; a violated verdict always carries its counterexample"""

    obligation: ProofObligation
    verdict: str
    counterexample: Optional[Trace] = None
    states_explored: int = 0
    elapsed: float = 0.0
    scope: Optional[Scope] = None
    note: Optional[str] = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if (self.verdict == VIOLATED) != (self.counterexample is not None):
            raise ValueError("a counterexample is present exactly when the verdict is violated")

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    @property
    def violated(self) -> bool:
        return self.verdict == VIOLATED


class TraceStepRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    event: str
    binding: Dict[str, str] = Field(default_factory=dict)


class ReportRecord(BaseModel):
    """One line of the structured report"""

    model_config = ConfigDict(frozen=True)

    kind: str
    machine: str
    abstract: Optional[str] = None
    event: Optional[str] = None
    invariant: Optional[str] = None
    verdict: str
    states: int
    elapsed_seconds: float
    note: Optional[str] = None
    trace: Optional[List[TraceStepRecord]] = None

    @classmethod
    def from_report(cls, report: CheckReport) -> "ReportRecord":
        ob = report.obligation
        trace = None
        if report.counterexample is not None:
            trace = [TraceStepRecord(**r) for r in report.counterexample.as_records()]
        return cls(
            kind=ob.kind,
            machine=ob.machine,
            abstract=ob.abstract,
            event=ob.event,
            invariant=ob.invariant_label,
            verdict=report.verdict,
            states=report.states_explored,
            elapsed_seconds=round(report.elapsed, 3),
            note=report.note,
            trace=trace,
        )


class RunResult(BaseModel):
    """Top-level structured output of every command"""

    command: str
    scope: Dict[str, int] = Field(default_factory=dict)
    reports: List[ReportRecord] = Field(default_factory=list)
    findings: List[Dict[str, Any]] = Field(default_factory=list)
    diagnostics: List[Dict[str, Any]] = Field(default_factory=list)
    states: List[Dict[str, str]] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    text: Optional[str] = None
    exit_status: int = 0


def summarize(reports: Iterable[CheckReport]) -> Dict[str, int]:
    counts = {v: 0 for v in VERDICTS}
    for report in reports:
        counts[report.verdict] += 1
    return counts


def render_text(reports: List[CheckReport], color: Optional[bool] = None, scope: Optional[Scope] = None) -> str:
    """
    Line-oriented report.

    One line per obligation ``VERDICT KIND machine/event/label states=N``,
    violations followed by their numbered trace steps.
    """
    color = color_enabled() if color is None else color
    lines: List[str] = []
    for report in reports:
        verdict = report.verdict.upper()
        if color:
            verdict = f"{_COLORS[report.verdict]}{verdict}{_RESET}"
        ob = report.obligation
        line = f"{verdict} {ob.kind} {ob.describe()} states={report.states_explored}"
        if ob.abstract:
            line += f" abstract={ob.abstract}"
        lines.append(line)
        if report.note:
            lines.append(f"    note: {report.note}")
        if report.counterexample is not None:
            if not report.counterexample.steps:
                lines.append("    trace: (empty)")
            for text in steps_text(report.counterexample):
                lines.append(f"    {text}")
    counts = summarize(reports)
    summary = (
        f"{len(reports)} obligation(s): {counts[HOLDS]} holds, "
        f"{counts[VIOLATED]} violated, {counts[SCOPE_EXHAUSTED]} scope-exhausted"
    )
    if scope is not None:
        summary += f" (scope {scope})"
    lines.append(summary)
    return "\n".join(lines) + "\n"


def render_structured(result: RunResult) -> str:
    return result.model_dump_json(indent=2) + "\n"


def run_result(command: str, reports: List[CheckReport], scope: Optional[Scope] = None, **extra) -> RunResult:
    return RunResult(
        command=command,
        scope=scope.as_dict() if scope is not None else {},
        reports=[ReportRecord.from_report(r) for r in reports],
        **extra,
    )
