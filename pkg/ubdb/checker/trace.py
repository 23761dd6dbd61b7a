"""
Counterexample traces and their replay through the set engine

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from ubdb.engine.events import EventEngine, assign_changes
from ubdb.engine.evaluator import Evaluator
from ubdb.engine.values import Scope, State, Value, format_value, relabel
from ubdb.checker.symmetry import compose
from ubdb.exceptions import EvaluationError, TraceReplayError
from ubdb.model.chain import ResolvedMachine
from ubdb.utils.logger import get_logger

logger = get_logger()


@dataclass(frozen=True)
class TraceStep:
    """One fired event: its name, parameter binding and the state it produced"""

    event: str
    binding: Tuple[Tuple[str, Value], ...]
    state: Optional[State] = None

    @classmethod
    def of(cls, event: str, binding: Mapping[str, Value], state: Optional[State] = None) -> "TraceStep":
        return cls(event, tuple(sorted(binding.items())), state)

    @property
    def binding_dict(self) -> Dict[str, Value]:
        return dict(self.binding)

    def describe(self) -> str:
        if not self.binding:
            return self.event
        args = ", ".join(f"{name} = {format_value(value)}" for name, value in self.binding)
        return f"{self.event}({args})"


@dataclass(frozen=True)
class Trace:
    machine: str
    steps: Tuple[TraceStep, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def final_state(self) -> Optional[State]:
        return self.steps[-1].state if self.steps else None

    def extended(self, step: TraceStep) -> "Trace":
        return Trace(self.machine, self.steps + (step,))

    def as_records(self) -> List[Dict[str, Any]]:
        """event/binding list used by structured reports and trace files"""
        return [
            {"event": step.event, "binding": {n: format_value(v) for n, v in step.binding}}
            for step in self.steps
        ]


def replay_trace(trace: Trace, machine: ResolvedMachine, scope: Scope) -> List[State]:
    """
    Re-execute a trace from the empty state.

    Every step must be enabled in its predecessor, and when the trace records
    post-states they must match what the set engine computes.

    Returns:
        The post-state of every step

    Raises:
        TraceReplayError: an unknown or disabled event, or a diverging state
    """
    engine = EventEngine(Evaluator.for_machine(machine, scope))
    state = State.empty(machine.variable_names)
    states: List[State] = []
    for index, step in enumerate(trace.steps, start=1):
        event = machine.event(step.event)
        if event is None:
            raise TraceReplayError(
                f"step {index}: machine '{machine.name}' has no event '{step.event}'", step=index
            )
        compiled = engine.compiled(event)
        env = engine.evaluator.environment(state)
        binding = step.binding_dict
        try:
            enabled = compiled.enabled(env, binding)
            post = assign_changes(state, compiled.effects(env, binding), event.name) if enabled else None
        except EvaluationError as e:
            raise TraceReplayError(f"step {index}: {step.describe()} failed: {e.message}", step=index) from e
        if post is None:
            raise TraceReplayError(f"step {index}: {step.describe()} is not enabled", step=index)
        if step.state is not None and step.state != post:
            raise TraceReplayError(
                f"step {index}: {step.describe()} leads to {post.as_text()}, trace says {step.state.as_text()}",
                step=index,
            )
        states.append(post)
        state = post
    logger.debug(f"Replayed {len(trace)} step(s) on {machine.name}")
    return states


def trace_from_records(
    records: Iterable[Mapping[str, Any]], machine: ResolvedMachine, scope: Scope
) -> Trace:
    """Read the event/binding list of a structured report back into a Trace"""
    from ubdb.engine import parse_value

    steps = []
    for index, record in enumerate(records, start=1):
        if "event" not in record:
            raise TraceReplayError(f"step {index}: record has no 'event' field", step=index)
        binding = {}
        for name, text in (record.get("binding") or {}).items():
            try:
                binding[name] = parse_value(str(text), scope)
            except Exception as e:
                raise TraceReplayError(f"step {index}: cannot read value of '{name}': {e}", step=index) from e
        steps.append(TraceStep.of(str(record["event"]), binding))
    return Trace(machine.name, tuple(steps))


def path_to(
    parents: Mapping[Any, Optional[tuple]],
    node: Any,
    machine: str,
    last: Optional[Tuple[str, Mapping[str, Value], Any]] = None,
    state_of: Optional[Callable[[Any], State]] = None,
) -> Trace:
    """
    Trace from the initial state to `node` along a BFS parent map.

    A link is (previous, event, binding) or (previous, event, binding,
    relabelling); the relabelling maps the atoms of the stored node back to
    those of the state the event produced. Steps are renamed back along the
    way, so every recorded state is the one the set engine computes.

    Args:
        last: One more (event, binding, post) step taken from `node`
        state_of: State of a node, when nodes are not States
    """
    state_of = state_of or (lambda n: n)
    links = []
    current = node
    while parents[current] is not None:
        links.append((current, parents[current]))
        current = parents[current][0]
    links.reverse()

    steps: List[TraceStep] = []
    to_real: Dict = {}
    for current, link in links:
        event, binding = link[1], link[2]
        relabelling = link[3] if len(link) > 3 else None
        real_binding = {n: relabel(v, to_real) for n, v in binding.items()}
        if relabelling:
            to_real = compose(to_real, relabelling)
        steps.append(TraceStep.of(event, real_binding, state_of(current).relabelled(to_real)))
    if last is not None:
        event, binding, post = last
        steps.append(
            TraceStep.of(
                event,
                {n: relabel(v, to_real) for n, v in binding.items()},
                state_of(post).relabelled(to_real),
            )
        )
    return Trace(machine, tuple(steps))


def steps_text(trace: Trace) -> Sequence[str]:
    return [f"{i}. {step.describe()}" for i, step in enumerate(trace.steps, start=1)]
