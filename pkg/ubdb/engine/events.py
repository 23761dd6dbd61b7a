"""
Event semantics: parameter enumeration, enabledness and simultaneous assignment

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from ubdb.exceptions import ConflictingAssignmentError, UnboundNameError
from ubdb.engine.evaluator import Evaluator
from ubdb.engine.values import Scope, State, Value, sorted_values
from ubdb.model import ast
from ubdb.model.ast import conjuncts, free_names
from ubdb.model.chain import ResolvedEvent
from ubdb.model.typecheck import fresh_parameter

Binding = Dict[str, Value]
Narrowing = Callable[[List[Value], List[Value]], List[Value]]


@dataclass
class _Level:
    """One parameter of the backtracking search, in sorted parameter order"""

    name: str
    typing: object
    equation: Optional[object]
    checks: List[object]


class CompiledEvent:
    """Guards, parameter search plan and actions of one event, compiled for an evaluator"""

    def __init__(self, event: ResolvedEvent, evaluator: Evaluator):
        self.event = event
        self.evaluator = evaluator
        names = sorted(event.parameter_names)
        typing_by_name = {p.name: p.typing for p in event.parameters}
        position = {n: i for i, n in enumerate(names)}
        params = set(names)

        levels = [_Level(n, evaluator.compile(typing_by_name[n]), None, []) for n in names]
        self.ground_checks = []
        for guard in event.guards:
            for part in conjuncts(guard.predicate):
                used = free_names(part) & params
                compiled = evaluator.compile(part)
                if not used:
                    self.ground_checks.append(compiled)
                    continue
                level = max(position[n] for n in used)
                target = levels[level]
                equation = _defining_equation(part, target.name, used, position)
                if equation is not None and target.equation is None:
                    target.equation = evaluator.compile(equation)
                target.checks.append(compiled)
        self.levels = levels
        self.actions = [(a.target, evaluator.compile(a.expression)) for a in event.actions]
        self._check_conflicts()

    def _check_conflicts(self) -> None:
        seen = set()
        for target, _ in self.actions:
            if target in seen:
                raise ConflictingAssignmentError(
                    f"Event '{self.event.name}' assigns '{target}' more than once",
                    event=self.event.name,
                    variable=target,
                )
            seen.add(target)

    def bindings(self, env: Dict[str, Value], narrow: Optional[Narrowing] = None) -> List[Binding]:
        """
        All guard-satisfying bindings, lexicographic by parameter name then value.

        narrow, when given, filters the candidates of each searched parameter
        given the values of the earlier ones.
        """
        for check in self.ground_checks:
            if not check(env):
                return []
        if not self.levels:
            return [{}]
        local = dict(env)
        found: List[Binding] = []
        names = [level.name for level in self.levels]
        self._search(0, local, found, names, narrow)
        return found

    def _search(self, depth: int, local, found, names, narrow=None) -> None:
        if depth == len(self.levels):
            found.append({n: local[n] for n in names})
            return
        level = self.levels[depth]
        domain = level.typing(local)
        if level.equation is not None:
            value = level.equation(local)
            candidates = [value] if value in domain else []
        else:
            candidates = sorted_values(domain)
            if narrow is not None:
                candidates = narrow(candidates, [local[n] for n in names[:depth]])
        for value in candidates:
            local[level.name] = value
            if all(check(local) for check in level.checks):
                self._search(depth + 1, local, found, names, narrow)
        local.pop(level.name, None)

    def enabled(self, env: Dict[str, Value], binding: Mapping[str, Value]) -> bool:
        local = dict(env)
        local.update(binding)
        if set(binding) != {level.name for level in self.levels}:
            return False
        for level in self.levels:
            if binding[level.name] not in level.typing(local):
                return False
        for check in self.ground_checks:
            if not check(local):
                return False
        return all(check(local) for level in self.levels for check in level.checks)

    def effects(self, env: Dict[str, Value], binding: Mapping[str, Value]) -> Dict[str, Value]:
        """Values of all action targets, computed from the pre-state"""
        local = dict(env)
        local.update(binding)
        return {target: expression(local) for target, expression in self.actions}


def _defining_equation(part, name: str, used, position) -> Optional[object]:
    """Right-hand side e of 'name = e' when e only uses earlier parameters"""
    if not isinstance(part, ast.Relational) or part.op != ast.EQUAL:
        return None
    for this, other in ((part.left, part.right), (part.right, part.left)):
        if isinstance(this, ast.Name) and this.name == name:
            other_params = free_names(other) & set(position)
            if name not in other_params and all(position[n] < position[name] for n in other_params):
                return other
    return None


class EventEngine:
    """Per-(machine, scope) cache of compiled events"""

    def __init__(self, evaluator: Evaluator):
        self.evaluator = evaluator
        self._compiled: Dict[int, Tuple[ResolvedEvent, CompiledEvent]] = {}

    def compiled(self, event: ResolvedEvent) -> CompiledEvent:
        entry = self._compiled.get(id(event))
        if entry is None or entry[0] is not event:
            entry = (event, CompiledEvent(event, self.evaluator))
            self._compiled[id(event)] = entry
        return entry[1]

    def successors(self, event: ResolvedEvent, state: State, env=None, narrow: Optional[Narrowing] = None):
        """(binding, post-state) pairs of every enabled binding"""
        env = env if env is not None else self.evaluator.environment(state)
        compiled = self.compiled(event)
        result = []
        for binding in compiled.bindings(env, narrow):
            changes = compiled.effects(env, binding)
            result.append((binding, assign_changes(state, changes, event.name)))
        return result


def assign_changes(state: State, changes: Mapping[str, Value], event_name: str) -> State:
    for target in changes:
        if target not in state:
            raise UnboundNameError(
                f"Event '{event_name}' assigns '{target}', which is not a state variable",
                name=target,
            )
    return state.updated(changes)


def _engine(machine, scope: Scope) -> EventEngine:
    return EventEngine(Evaluator(scope, machine.constants if machine else (), machine))


def enumerate_bindings(event: ResolvedEvent, state: State, scope: Scope, machine=None) -> List[Binding]:
    """Exactly the parameter bindings satisfying all guards, in deterministic order"""
    engine = _engine(machine, scope)
    return engine.compiled(event).bindings(engine.evaluator.environment(state))


def is_enabled(event: ResolvedEvent, binding: Mapping[str, Value], state: State, scope: Scope, machine=None) -> bool:
    """Parameter typings and all guards hold for this binding"""
    engine = _engine(machine, scope)
    return engine.compiled(event).enabled(engine.evaluator.environment(state), binding)


def apply_event(
    event: ResolvedEvent,
    binding: Mapping[str, Value],
    state: State,
    scope: Optional[Scope] = None,
    machine=None,
) -> State:
    """
    Successor state: every action reads the pre-state, all targets are assigned
    simultaneously, unassigned variables keep their values.

    Raises:
        ConflictingAssignmentError: two actions target one variable
    """
    engine = _engine(machine, scope or Scope())
    compiled = engine.compiled(event)
    changes = compiled.effects(engine.evaluator.environment(state), binding)
    return assign_changes(state, changes, event.name)


def scope_exhausted(machine, event: ResolvedEvent, state: State, scope: Scope) -> Optional[str]:
    """Carrier set of a constructor's fresh parameter when no fresh atom is left"""
    if event.kind != "constructor" or machine is None:
        return None
    fresh = fresh_parameter(machine, event)
    owner = event.class_owner
    if fresh is None or owner is None:
        return None
    carrier = machine.carrier_of(owner)
    if carrier is None or carrier not in scope:
        return None
    used = set()
    for name in (owner,) + machine.supertypes(owner):
        if name in state:
            used |= state[name]
    if all(atom in used for atom in scope.atoms(carrier)):
        return carrier
    return None


def replay(
    events: Sequence[Tuple[ResolvedEvent, Mapping[str, Value]]],
    initial: State,
    scope: Scope,
    machine=None,
) -> List[State]:
    """States after each step; a disabled step raises ValueError with its index"""
    engine = _engine(machine, scope)
    states = []
    state = initial
    for index, (event, binding) in enumerate(events):
        compiled = engine.compiled(event)
        env = engine.evaluator.environment(state)
        if not compiled.enabled(env, binding):
            raise ValueError(f"step {index + 1}: event '{event.name}' is not enabled")
        state = assign_changes(state, compiled.effects(env, binding), event.name)
        states.append(state)
    return states
