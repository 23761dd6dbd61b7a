"""
Lint findings shared by the pattern checks

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Iterable, List, Optional

from pydantic import BaseModel, ConfigDict, field_validator

ERROR = "error"
WARNING = "warning"
INFO = "info"

SEVERITIES = (ERROR, WARNING, INFO)

# Stable rule identifiers, documented in docs/LINT_RULES.md
RULES = (
    "secondary-structure",
    "attribute-source",
    "historical-write",
    "secondary-layer",
    "historical-layer",
    "query-layer",
    "layer-order",
    "attribute-order",
    "layer-inferred",
    "layer-sequence",
    "non-atomic-move",
    "historical-attribute",
    "no-historical",
)


class LintFinding(BaseModel):
    model_config = ConfigDict(frozen=True)

    rule: str
    severity: str
    subject: str
    message: str
    machine: Optional[str] = None

    @field_validator("rule")
    @classmethod
    def _known_rule(cls, value: str) -> str:
        if value not in RULES:
            raise ValueError(f"unknown lint rule {value!r}")
        return value

    @field_validator("severity")
    @classmethod
    def _known_severity(cls, value: str) -> str:
        if value not in SEVERITIES:
            raise ValueError(f"unknown severity {value!r}")
        return value

    def describe(self) -> str:
        where = f"{self.machine}: " if self.machine else ""
        return f"{self.severity.upper()} {self.rule} {where}{self.subject}: {self.message}"


def has_errors(findings: Iterable[LintFinding], strict: bool = False) -> bool:
    """Error findings (and warnings when strict) make lint fail"""
    failing = {ERROR, WARNING} if strict else {ERROR}
    return any(f.severity in failing for f in findings)


def dedupe(findings: Iterable[LintFinding]) -> List[LintFinding]:
    """Drop repeats of the same (rule, subject), keeping the first machine that reported it"""
    seen = set()
    result = []
    for finding in findings:
        key = (finding.rule, finding.subject)
        if key in seen:
            continue
        seen.add(key)
        result.append(finding)
    return result


def render_findings(findings: List[LintFinding]) -> str:
    lines = [f.describe() for f in findings]
    errors = sum(1 for f in findings if f.severity == ERROR)
    warnings = sum(1 for f in findings if f.severity == WARNING)
    lines.append(f"{len(findings)} finding(s): {errors} error(s), {warnings} warning(s)")
    return "\n".join(lines) + "\n"
