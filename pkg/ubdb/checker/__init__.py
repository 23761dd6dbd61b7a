"""
Proof obligations discharged by bounded explicit-state exploration

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from ubdb.checker.explorer import explore, explore_refinement, reachable_states
from ubdb.checker.obligations import FEAS, GLU, GRD, INV, SIM, ProofObligation, generate_obligations
from ubdb.checker.report import (
    BY_CONSTRUCTION,
    HOLDS,
    SCOPE_EXHAUSTED,
    VIOLATED,
    CheckReport,
    ReportRecord,
    RunResult,
    TraceStepRecord,
    render_structured,
    render_text,
    run_result,
    summarize,
)
from ubdb.checker.runner import (
    check,
    check_chain_refinements,
    check_enabledness,
    check_machines_async,
    check_refinement,
)
from ubdb.checker.trace import Trace, TraceStep, replay_trace, trace_from_records

__all__ = [
    "BY_CONSTRUCTION",
    "FEAS",
    "GLU",
    "GRD",
    "HOLDS",
    "INV",
    "SCOPE_EXHAUSTED",
    "SIM",
    "VIOLATED",
    "CheckReport",
    "ProofObligation",
    "ReportRecord",
    "RunResult",
    "Trace",
    "TraceStep",
    "TraceStepRecord",
    "check",
    "check_chain_refinements",
    "check_enabledness",
    "check_machines_async",
    "check_refinement",
    "explore",
    "explore_refinement",
    "generate_obligations",
    "reachable_states",
    "render_structured",
    "render_text",
    "replay_trace",
    "run_result",
    "summarize",
    "trace_from_records",
]
