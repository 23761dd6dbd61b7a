"""
Discharging obligations by exhaustive exploration

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import asyncio
from collections import deque
from typing import Dict, List, Optional, Sequence, Union

from ubdb.checker.explorer import Exploration, JointExploration, explore, explore_refinement
from ubdb.checker.obligations import FEAS, GRD, INV, SIM, ProofObligation, machine_obligations, refinement_obligations
from ubdb.checker.report import BY_CONSTRUCTION, HOLDS, SCOPE_EXHAUSTED, VIOLATED, CheckReport
from ubdb.checker.trace import Trace, replay_trace
from ubdb.config import get_state_budget, get_worker_count
from ubdb.engine.evaluator import Evaluator
from ubdb.engine.values import Scope, State
from ubdb.exceptions import FunctionApplicationError, TraceReplayError, UsageError
from ubdb.model.ast import RefinementChain
from ubdb.model.chain import ORIGIN_EXTENDS, ORIGIN_INHERITED, ResolvedChain, ResolvedMachine
from ubdb.model.resolve import resolve
from ubdb.utils.logger import get_logger

logger = get_logger()

ChainLike = Union[RefinementChain, ResolvedChain]


def _prepare(chain: ChainLike, scope: Optional[Scope]):
    resolved = resolve(chain)
    return resolved, scope if scope is not None else Scope.for_chain(resolved)


def _machines(resolved: ResolvedChain, machine: Optional[str]) -> List[ResolvedMachine]:
    if machine is None:
        return list(resolved.machines)
    found = resolved.machine(machine)
    if found is None:
        raise UsageError(
            f"No machine named '{machine}'",
            details={"machines": [m.name for m in resolved.machines]},
            suggestions=["Pass one of the machine names with --machine"],
        )
    return [found]


def _budget_note(budget: Optional[int]) -> str:
    return f"state budget of {get_state_budget(budget)} reached before exploration finished"


# --- single machine ------------------------------------------------------------


def check(
    chain: ChainLike,
    scope: Optional[Scope] = None,
    machine: Optional[str] = None,
    budget: Optional[int] = None,
) -> List[CheckReport]:
    """
    INV and FEAS verdicts by breadth-first exploration from the empty state.

    Args:
        chain: Parsed or resolved chain
        scope: Instance bounds (default bounds of the chain when omitted)
        machine: Machine to check; every machine in chain order when omitted
        budget: Maximum number of distinct states per machine

    Returns:
        One report per obligation, in obligation order
    """
    resolved, scope = _prepare(chain, scope)
    reports: List[CheckReport] = []
    for target in _machines(resolved, machine):
        reports.extend(check_machine(target, scope, budget))
    return reports


def check_machine(machine: ResolvedMachine, scope: Scope, budget: Optional[int] = None) -> List[CheckReport]:
    exploration = explore(machine, scope, budget)
    reports = []
    for obligation in machine_obligations(machine):
        if obligation.kind == INV:
            reports.append(_invariant_report(obligation, exploration, machine, budget))
        else:
            reports.append(_feasibility_report(obligation, exploration, machine, budget))
    _log_summary(machine.name, reports)
    return reports


def _report(obligation, verdict, exploration, counterexample=None, note=None) -> CheckReport:
    return CheckReport(
        obligation=obligation,
        verdict=verdict,
        counterexample=counterexample,
        states_explored=exploration.states,
        elapsed=exploration.elapsed,
        scope=exploration.scope,
        note=note,
    )


def _invariant_report(obligation: ProofObligation, exploration: Exploration, machine, budget) -> CheckReport:
    failure = exploration.violations.get((obligation.event, obligation.invariant_label))
    if failure is not None:
        trace, note = failure
        _confirm_invariant_violation(trace, machine, exploration.scope, obligation.invariant_label)
        return _report(obligation, VIOLATED, exploration, trace, note)
    if not exploration.complete:
        return _report(obligation, SCOPE_EXHAUSTED, exploration, note=_budget_note(budget))
    return _report(obligation, HOLDS, exploration)


def _feasibility_report(obligation: ProofObligation, exploration: Exploration, machine, budget) -> CheckReport:
    event = obligation.event
    if event in exploration.blocked:
        trace, note = exploration.blocked[event]
        replay_trace(trace, machine, exploration.scope)
        return _report(obligation, VIOLATED, exploration, trace, note)
    if event in exploration.fired:
        return _report(obligation, HOLDS, exploration)
    if not exploration.complete:
        return _report(obligation, SCOPE_EXHAUSTED, exploration, note=_budget_note(budget))
    if event in exploration.exhausted:
        carrier = exploration.exhausted[event]
        return _report(
            obligation,
            SCOPE_EXHAUSTED,
            exploration,
            note=f"no fresh {carrier} atom left at {carrier}={exploration.scope.bound(carrier)}",
        )
    return _report(
        obligation,
        VIOLATED,
        exploration,
        Trace(machine.name),
        note="never enabled in a reachable state",
    )


def _confirm_invariant_violation(trace: Trace, machine: ResolvedMachine, scope: Scope, label: str) -> None:
    """Replay a counterexample and re-evaluate the invariant on its last two states"""
    states = replay_trace(trace, machine, scope)
    invariant = machine.invariant(label)
    evaluator = Evaluator.for_machine(machine, scope)

    def holds(state: State) -> bool:
        try:
            return evaluator.holds(invariant.predicate, state)
        except FunctionApplicationError:
            return False

    if holds(states[-1]):
        raise TraceReplayError(
            f"{label} holds after replaying the counterexample on {machine.name}", step=len(states)
        )
    if len(states) > 1 and not holds(states[-2]):
        raise TraceReplayError(
            f"{label} is already broken before the last step of the counterexample", step=len(states) - 1
        )


def _log_summary(name: str, reports: Sequence[CheckReport]) -> None:
    violated = sum(1 for r in reports if r.verdict == VIOLATED)
    exhausted = sum(1 for r in reports if r.verdict == SCOPE_EXHAUSTED)
    logger.info(f"{name}: {len(reports)} obligation(s), {violated} violated, {exhausted} scope-exhausted")


# --- refinement ------------------------------------------------------------------


def check_refinement(
    chain: ChainLike,
    scope: Optional[Scope] = None,
    abstract: Optional[str] = None,
    concrete: Optional[str] = None,
    budget: Optional[int] = None,
) -> List[CheckReport]:
    """
    GRD, SIM and GLU verdicts for one refinement step by joint exploration.

    Without machine names the last refinement step of the chain is checked.

    Raises:
        UsageError: the machines are unknown or not a direct refinement step
    """
    resolved, scope = _prepare(chain, scope)
    if concrete is None:
        steps = resolved.refinement_steps()
        if not steps:
            raise UsageError("The chain has no refinement step")
        concrete = steps[-1][1].name
    concrete_machine = _machines(resolved, concrete)[0]
    abstract = abstract or concrete_machine.abstract
    abstract_machine = _machines(resolved, abstract)[0] if abstract else None
    if abstract_machine is None or concrete_machine.abstract != abstract_machine.name:
        raise UsageError(
            f"'{concrete}' does not directly refine '{abstract}'",
            suggestions=["refine-check pairs each machine with the machine it refines"],
        )
    return check_refinement_step(abstract_machine, concrete_machine, scope, budget)


def check_refinement_step(
    abstract: ResolvedMachine, concrete: ResolvedMachine, scope: Scope, budget: Optional[int] = None
) -> List[CheckReport]:
    joint = explore_refinement(abstract, concrete, scope, budget)
    reports = []
    for obligation in refinement_obligations(abstract, concrete):
        reports.append(_refinement_report(obligation, joint, concrete, budget))
    _log_summary(f"{abstract.name} -> {concrete.name}", reports)
    return reports


def check_chain_refinements(
    chain: ChainLike, scope: Optional[Scope] = None, budget: Optional[int] = None
) -> List[CheckReport]:
    """Every refinement step of the chain, in chain order"""
    resolved, scope = _prepare(chain, scope)
    reports: List[CheckReport] = []
    for abstract, concrete in resolved.refinement_steps():
        reports.extend(check_refinement_step(abstract, concrete, scope, budget))
    return reports


def _refinement_report(obligation: ProofObligation, joint: JointExploration, concrete, budget) -> CheckReport:
    if obligation.kind == GRD:
        failure = joint.grd.get(obligation.event)
    elif obligation.kind == SIM:
        failure = joint.sim.get(obligation.event)
    else:
        failure = joint.glu.get((obligation.event, obligation.invariant_label))
    if failure is not None:
        trace, note = failure
        replay_trace(trace, concrete, joint.scope)
        return _report(obligation, VIOLATED, joint, trace, note)
    if not joint.complete:
        return _report(obligation, SCOPE_EXHAUSTED, joint, note=_budget_note(budget))
    note = None
    event = concrete.event(obligation.event)
    if obligation.kind == GRD and event is not None and event.origin in (ORIGIN_INHERITED, ORIGIN_EXTENDS):
        note = BY_CONSTRUCTION
    return _report(obligation, HOLDS, joint, note=note)


# --- enabledness -----------------------------------------------------------------


def check_enabledness(
    chain: ChainLike,
    scope: Optional[Scope] = None,
    machine: Optional[str] = None,
    budget: Optional[int] = None,
) -> List[CheckReport]:
    """
    FEAS verdict per event, with the classes blocking each unreachable constructor.

    Constructors that can never fire because each needs an instance of a class
    only another blocked constructor creates are reported with the cycle,
    for example ``circular dependency: addDepartment -> addStaff -> addDepartment``.
    """
    resolved, scope = _prepare(chain, scope)
    reports: List[CheckReport] = []
    for target in _machines(resolved, machine):
        exploration = explore(target, scope, budget)
        machine_reports = [
            _feasibility_report(ob, exploration, target, budget)
            for ob in machine_obligations(target)
            if ob.kind == FEAS
        ]
        reports.extend(_annotate_blocking(target, exploration, machine_reports))
    return reports


def _annotate_blocking(machine: ResolvedMachine, exploration: Exploration, reports: List[CheckReport]):
    blocked = {
        r.obligation.event
        for r in reports
        if r.verdict == VIOLATED and machine.event(r.obligation.event).kind == "constructor"
    }
    needs: Dict[str, List[str]] = {}
    for name in sorted(blocked):
        event = machine.event(name)
        own = {event.class_owner, *machine.supertypes(event.class_owner)} if event.class_owner else set()
        needs[name] = sorted(
            c for c in machine.class_names if c in event.reads() and c not in own and c not in exploration.populated
        )
    edges = {
        name: sorted(
            other
            for other in blocked
            if other != name and _creates(machine, machine.event(other), needs[name])
        )
        for name in blocked
    }
    annotated = []
    for report in reports:
        name = report.obligation.event
        if name not in blocked or not needs.get(name):
            annotated.append(report)
            continue
        note = f"needs {', '.join(needs[name])}, never populated"
        cycle = _shortest_cycle(name, edges)
        if cycle:
            note += f"; circular dependency: {' -> '.join(cycle)}"
        annotated.append(
            CheckReport(
                obligation=report.obligation,
                verdict=report.verdict,
                counterexample=report.counterexample,
                states_explored=report.states_explored,
                elapsed=report.elapsed,
                scope=report.scope,
                note=note,
            )
        )
    return annotated


def _creates(machine: ResolvedMachine, event, classes: List[str]) -> bool:
    if event.class_owner is None:
        return False
    made = {event.class_owner, *machine.supertypes(event.class_owner)}
    return bool(made & set(classes))


def _shortest_cycle(start: str, edges: Dict[str, List[str]]) -> Optional[List[str]]:
    """Shortest cycle through start, rotated to begin at its smallest name and closed"""
    parents = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in edges.get(node, ()):
            if nxt == start:
                path = [node]
                while parents[path[-1]] is not None:
                    path.append(parents[path[-1]])
                path.reverse()
                pivot = path.index(min(path))
                rotated = path[pivot:] + path[:pivot]
                return rotated + [rotated[0]]
            if nxt not in parents:
                parents[nxt] = node
                queue.append(nxt)
    return None


# --- concurrent checking ---------------------------------------------------------


async def _check_one_async(machine: ResolvedMachine, scope: Scope, budget, semaphore: asyncio.Semaphore) -> tuple:
    async with semaphore:
        logger.debug(f"Checking {machine.name}")
        loop = asyncio.get_event_loop()
        reports = await loop.run_in_executor(None, check_machine, machine, scope, budget)
        return machine.name, reports


async def check_machines_async(
    chain: ChainLike,
    scope: Optional[Scope] = None,
    machines: Optional[List[str]] = None,
    budget: Optional[int] = None,
    max_concurrent: Optional[int] = None,
) -> List[CheckReport]:
    """
    Run check on several machines in parallel.

    Reports are merged in chain order whatever order the workers finish in.

    Args:
        chain: Parsed or resolved chain
        scope: Instance bounds
        machines: Machine names (default: all)
        budget: State budget per machine
        max_concurrent: Maximum concurrent explorations (default: UBDB_WORKERS)
    """
    resolved, scope = _prepare(chain, scope)
    targets = [m for name in machines for m in _machines(resolved, name)] if machines else list(resolved.machines)
    max_concurrent = max(1, get_worker_count(max_concurrent))
    logger.info(f"Checking {len(targets)} machine(s) (max_concurrent={max_concurrent})")

    semaphore = asyncio.Semaphore(max_concurrent)
    tasks = [_check_one_async(m, scope, budget, semaphore) for m in targets]
    results = await asyncio.gather(*tasks, return_exceptions=True)

    by_machine: Dict[str, List[CheckReport]] = {}
    for item in results:
        if isinstance(item, Exception):
            logger.error(f"Machine check raised: {item}", exc_info=item)
            raise item
        name, reports = item
        by_machine[name] = reports

    merged: List[CheckReport] = []
    for machine in targets:
        merged.extend(by_machine[machine.name])
    return merged
