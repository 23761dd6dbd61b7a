"""
Breadth-first exploration of reachable states

Single-machine exploration records invariant-preservation failures, which
events ever fire and which constructors ran out of fresh atoms. Joint
exploration pairs every concrete transition with the abstract transition it
refines and records guard-strengthening, simulation and gluing failures.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from ubdb.checker.symmetry import Symmetry
from ubdb.checker.trace import Trace, path_to
from ubdb.config import get_state_budget, symmetry_enabled
from ubdb.engine.evaluator import Evaluator
from ubdb.engine.events import EventEngine, assign_changes, scope_exhausted
from ubdb.engine.values import Scope, State
from ubdb.exceptions import FunctionApplicationError
from ubdb.model.ast import free_names
from ubdb.model.chain import ORIGIN_NEW, ResolvedEvent, ResolvedMachine
from ubdb.utils.logger import get_logger

logger = get_logger()

Failure = Tuple[Trace, Optional[str]]


@dataclass
class Exploration:
    """Everything one BFS run over a single machine learned"""

    machine: str
    scope: Scope
    states: int = 0
    complete: bool = True
    elapsed: float = 0.0
    violations: Dict[Tuple[str, str], Failure] = field(default_factory=dict)
    fired: Set[str] = field(default_factory=set)
    blocked: Dict[str, Failure] = field(default_factory=dict)
    exhausted: Dict[str, str] = field(default_factory=dict)
    populated: Set[str] = field(default_factory=set)
    reachable: FrozenSet[State] = frozenset()


class _InvariantTable:
    """Compiled invariants of a machine; a state maps to the bitmask of those it violates"""

    def __init__(self, invariants, evaluator: Evaluator):
        self.labels = [inv.label for inv in invariants]
        self.checks = [evaluator.compile(inv.predicate) for inv in invariants]
        self.reads = [free_names(inv.predicate) for inv in invariants]
        self.notes: Dict[str, str] = {}
        self._touched: Dict[str, Tuple[int, ...]] = {}

    def _check(self, index: int, env) -> bool:
        try:
            return self.checks[index](env)
        except FunctionApplicationError as e:
            self.notes.setdefault(self.labels[index], f"well-definedness: {e.message}")
            return False

    def mask(self, env) -> int:
        bits = 0
        for index in range(len(self.checks)):
            if not self._check(index, env):
                bits |= 1 << index
        return bits

    def touched(self, event: ResolvedEvent) -> Tuple[int, ...]:
        """Invariants reading a variable the event assigns"""
        if event.name not in self._touched:
            targets = set(event.targets)
            self._touched[event.name] = tuple(i for i, names in enumerate(self.reads) if names & targets)
        return self._touched[event.name]

    def updated_mask(self, env, pre: int, event: ResolvedEvent) -> int:
        """Mask after `event`; invariants over untouched variables keep their pre-state bit"""
        bits = pre
        for index in self.touched(event):
            if self._check(index, env):
                bits &= ~(1 << index)
            else:
                bits |= 1 << index
        return bits

    def newly_broken(self, pre: int, post: int, from_initial: bool) -> List[str]:
        bad = post if from_initial else post & ~pre
        return [self.labels[i] for i in range(len(self.labels)) if bad >> i & 1]


def _reduction(scope: Scope, machines, symmetry: Optional[bool]) -> Optional[Symmetry]:
    if not symmetry_enabled(symmetry):
        return None
    return Symmetry.for_machines(scope, machines)


def explore(
    machine: ResolvedMachine,
    scope: Scope,
    budget: Optional[int] = None,
    keep_states: bool = False,
    symmetry: Optional[bool] = None,
) -> Exploration:
    """
    Exhaustive BFS from the all-empty state.

    An invariant I is reported broken by event e when some reachable
    transition by e ends in a state violating I and starts from a state
    satisfying I (or from the initial state). The first trace found for each
    (event, invariant) pair is a shortest one.

    With symmetry on, states are stored up to a renaming of interchangeable
    atoms, so the state count is the number of such classes. Traces are
    mapped back to the states the set engine actually computes.

    Args:
        machine: Resolved machine to explore
        scope: Instance bounds per carrier set
        budget: Maximum number of distinct states (default from config)
        keep_states: Keep the reachable set on the result
        symmetry: Reduce by renamings of interchangeable atoms (default from config)

    Returns:
        Exploration with the findings; complete is False when the budget ran out
    """
    budget = get_state_budget(budget)
    started = time.monotonic()
    evaluator = Evaluator.for_machine(machine, scope)
    engine = EventEngine(evaluator)
    table = _InvariantTable(machine.invariants, evaluator)
    classes = machine.class_names
    reduction = _reduction(scope, [machine], symmetry)
    result = Exploration(machine.name, scope)

    initial = State.empty(machine.variable_names)
    parents: Dict[State, Optional[tuple]] = {initial: None}
    masks = {initial: table.mask(evaluator.environment(initial))}
    queue = deque([initial])

    while queue and result.complete:
        state = queue.popleft()
        env = evaluator.environment(state)
        narrow = reduction.narrowing(state.values) if reduction else None
        for name in classes:
            if state[name]:
                result.populated.add(name)
        for event in machine.events:
            try:
                successors = engine.successors(event, state, env, narrow)
            except FunctionApplicationError as e:
                if event.name not in result.blocked:
                    result.blocked[event.name] = (
                        path_to(parents, state, machine.name),
                        f"well-definedness: {e.message}",
                    )
                continue
            if not successors:
                if event.name not in result.fired and event.name not in result.exhausted:
                    carrier = scope_exhausted(machine, event, state, scope)
                    if carrier is not None:
                        result.exhausted[event.name] = carrier
                continue
            result.fired.add(event.name)
            for binding, post in successors:
                node, backward = post, None
                if reduction is not None:
                    values, backward = reduction.canonical(post.values)
                    if backward:
                        node = State(post.names, values)
                if node not in parents:
                    if len(parents) >= budget:
                        result.complete = False
                        break
                    parents[node] = (state, event.name, binding, backward)
                    masks[node] = table.updated_mask(evaluator.environment(node), masks[state], event)
                    queue.append(node)
                for label in table.newly_broken(masks[state], masks[node], state is initial):
                    key = (event.name, label)
                    if key not in result.violations:
                        trace = path_to(parents, state, machine.name, last=(event.name, binding, post))
                        result.violations[key] = (trace, table.notes.get(label))
            if not result.complete:
                break

    result.states = len(parents)
    result.elapsed = time.monotonic() - started
    if keep_states:
        result.reachable = frozenset(parents)
    logger.info(
        f"Explored {result.states} state(s) of {machine.name} at scope {scope} "
        f"in {result.elapsed:.2f}s{'' if result.complete else ' (budget exhausted)'}"
    )
    return result


def reachable_states(machine: ResolvedMachine, scope: Scope, budget: Optional[int] = None) -> FrozenSet[State]:
    """States reachable from the empty state, truncated at the budget, without symmetry reduction"""
    return explore(machine, scope, budget, keep_states=True, symmetry=False).reachable


# --- joint refinement exploration ---------------------------------------------


@dataclass
class JointExploration:
    abstract: str
    concrete: str
    scope: Scope
    states: int = 0
    complete: bool = True
    elapsed: float = 0.0
    grd: Dict[str, Failure] = field(default_factory=dict)
    sim: Dict[str, Failure] = field(default_factory=dict)
    glu: Dict[Tuple[str, str], Failure] = field(default_factory=dict)


class _Refinement:
    """Everything needed to relate one concrete step to an abstract step"""

    def __init__(self, abstract: ResolvedMachine, concrete: ResolvedMachine, scope: Scope):
        self.abstract = abstract
        self.concrete = concrete
        self.abstract_engine = EventEngine(Evaluator.for_machine(abstract, scope))
        self.evaluator = Evaluator.for_machine(concrete, scope)
        self.concrete_engine = EventEngine(self.evaluator)
        concrete_names = set(concrete.variable_names)
        self.kept = tuple(n for n in abstract.variable_names if n in concrete_names)
        self.only_abstract = tuple(n for n in abstract.variable_names if n not in concrete_names)
        removed = set(concrete.removed)
        self.gluing = _InvariantTable(concrete.gluing, self.evaluator)
        self.simulation = _InvariantTable(
            [inv for inv in concrete.gluing if free_names(inv.predicate) & removed], self.evaluator
        )

    def merged_env(self, a: State, c: State):
        env = self.evaluator.environment(c)
        for name in self.only_abstract:
            env[name] = a[name]
        return env

    def abstract_candidates(self, event: ResolvedEvent, a: State, binding) -> List[dict]:
        """Enabled bindings of the refined abstract event agreeing with the concrete binding"""
        base = self.abstract.event(event.abstract)
        compiled = self.abstract_engine.compiled(base)
        env = self.abstract_engine.evaluator.environment(a)
        names = base.parameter_names
        if all(n in binding for n in names):
            projected = {n: binding[n] for n in names}
            return [projected] if compiled.enabled(env, projected) else []
        shared = [n for n in names if n in binding]
        return [b for b in compiled.bindings(env) if all(b[n] == binding[n] for n in shared)]

    def abstract_post(self, event: ResolvedEvent, a: State, binding) -> State:
        base = self.abstract.event(event.abstract)
        compiled = self.abstract_engine.compiled(base)
        env = self.abstract_engine.evaluator.environment(a)
        return assign_changes(a, compiled.effects(env, binding), base.name)

    def kept_equal(self, a: State, c: State) -> bool:
        return all(a[n] == c[n] for n in self.kept)


def explore_refinement(
    abstract: ResolvedMachine,
    concrete: ResolvedMachine,
    scope: Scope,
    budget: Optional[int] = None,
    symmetry: Optional[bool] = None,
) -> JointExploration:
    """
    BFS over (abstract, concrete) state pairs from the pair of empty states.

    A concrete event that refines or extends an abstract event is matched
    with the first enabled abstract binding that agrees on shared parameter
    names and re-establishes the simulation; none enabled breaks GRD, none
    simulating breaks SIM. New events are matched with abstract skip. A
    transition that breaks GRD or SIM is recorded but its pair is not
    explored further.
    """
    budget = get_state_budget(budget)
    started = time.monotonic()
    ref = _Refinement(abstract, concrete, scope)
    reduction = _reduction(scope, [abstract, concrete], symmetry)
    result = JointExploration(abstract.name, concrete.name, scope)

    initial = (State.empty(abstract.variable_names), State.empty(concrete.variable_names))
    parents: Dict[tuple, Optional[tuple]] = {initial: None}
    masks = {initial: _masks(ref, *initial)}
    queue = deque([initial])
    split = len(abstract.variable_names)

    def trace_to(pair, event, binding, post) -> Trace:
        return path_to(parents, pair, concrete.name, last=(event, binding, post), state_of=_concrete_of)

    while queue and result.complete:
        pair = queue.popleft()
        a, c = pair
        env = ref.evaluator.environment(c)
        narrow = reduction.narrowing(a.values + c.values) if reduction else None
        for event in concrete.events:
            try:
                successors = ref.concrete_engine.successors(event, c, env, narrow)
            except FunctionApplicationError:
                # concrete well-definedness is the single-machine FEAS concern
                continue
            for binding, c_post in successors:
                a_post, grd_note, sim_note = _match(ref, event, a, c_post, binding, masks[pair], pair is initial)
                if grd_note is not None and event.name not in result.grd:
                    result.grd[event.name] = (trace_to(pair, event.name, binding, (a_post, c_post)), grd_note)
                if a_post is None:
                    continue
                post = (a_post, c_post)
                if sim_note is not None:
                    if event.name not in result.sim:
                        result.sim[event.name] = (trace_to(pair, event.name, binding, post), sim_note)
                    continue
                node, backward = post, None
                if reduction is not None:
                    values, backward = reduction.canonical(a_post.values + c_post.values)
                    if backward:
                        node = (State(a_post.names, values[:split]), State(c_post.names, values[split:]))
                if node not in parents:
                    if len(parents) >= budget:
                        result.complete = False
                        break
                    parents[node] = (pair, event.name, binding, backward)
                    masks[node] = _masks(ref, *node)
                    queue.append(node)
                for label in ref.gluing.newly_broken(masks[pair][0], masks[node][0], pair is initial):
                    key = (event.name, label)
                    if key not in result.glu:
                        result.glu[key] = (
                            trace_to(pair, event.name, binding, post),
                            ref.gluing.notes.get(label),
                        )
            if not result.complete:
                break

    result.states = len(parents)
    result.elapsed = time.monotonic() - started
    logger.info(
        f"Explored {result.states} state pair(s) of {abstract.name} -> {concrete.name} "
        f"in {result.elapsed:.2f}s{'' if result.complete else ' (budget exhausted)'}"
    )
    return result


def _concrete_of(pair) -> State:
    return pair[1]


def _masks(ref: _Refinement, a: State, c: State) -> Tuple[int, int]:
    env = ref.merged_env(a, c)
    return ref.gluing.mask(env), ref.simulation.mask(env)


def _simulates(ref: _Refinement, a_post: State, c_post: State, pre_mask: int, from_initial: bool) -> Optional[str]:
    if not ref.kept_equal(a_post, c_post):
        differing = [n for n in ref.kept if a_post[n] != c_post[n]]
        return f"abstract and concrete values differ for {', '.join(differing)}"
    post_mask = ref.simulation.mask(ref.merged_env(a_post, c_post))
    broken = ref.simulation.newly_broken(pre_mask, post_mask, from_initial)
    if broken:
        return f"gluing invariant {', '.join(broken)} fails after the paired step"
    return None


def _match(ref: _Refinement, event: ResolvedEvent, a: State, c_post: State, binding, pre_masks, from_initial):
    """
    Abstract post-state paired with a concrete step.

    Returns:
        (abstract post or None, GRD failure note, SIM failure note)
    """
    if event.origin == ORIGIN_NEW or event.abstract is None:
        return a, None, _simulates(ref, a, c_post, pre_masks[1], from_initial)
    try:
        candidates = ref.abstract_candidates(event, a, binding)
    except FunctionApplicationError as e:
        return None, f"well-definedness in abstract guard: {e.message}", None
    if not candidates:
        return None, f"abstract event {event.abstract} is not enabled for this binding", None
    first_note = None
    first_post = None
    for candidate in candidates:
        try:
            a_post = ref.abstract_post(event, a, candidate)
        except FunctionApplicationError as e:
            return None, f"well-definedness in abstract action: {e.message}", None
        note = _simulates(ref, a_post, c_post, pre_masks[1], from_initial)
        if note is None:
            return a_post, None, None
        if first_post is None:
            first_post, first_note = a_post, note
    return first_post, None, first_note
