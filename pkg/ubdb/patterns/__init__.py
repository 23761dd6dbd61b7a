"""
Modelling patterns: class kinds, layering, association splitting, historical data

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import List

from ubdb.patterns.classify import classify_classes
from ubdb.patterns.findings import ERROR, INFO, RULES, WARNING, LintFinding, has_errors, render_findings
from ubdb.patterns.historical import check_historical_pattern
from ubdb.patterns.layering import infer_layer, lint_layering
from ubdb.patterns.splitting import SplitSpec, abstraction_image, split_association


def lint_chain(chain) -> List[LintFinding]:
    """All lint findings of a chain: class kinds, then layering, then the historical pattern"""
    return classify_classes(chain) + lint_layering(chain) + check_historical_pattern(chain)


__all__ = [
    "ERROR",
    "INFO",
    "RULES",
    "WARNING",
    "LintFinding",
    "SplitSpec",
    "abstraction_image",
    "check_historical_pattern",
    "classify_classes",
    "has_errors",
    "infer_layer",
    "lint_chain",
    "lint_layering",
    "render_findings",
    "split_association",
]
