"""
Tests comparing the explorer against a brute-force reachability oracle

The oracle enumerates every parameter tuple from the typing sets, evaluates
guards and actions one node at a time and runs a plain BFS. It shares no code
with the compiled event path the explorer uses.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

import random

import pytest

from ubdb.checker import INV, VIOLATED, check, reachable_states
from ubdb.config import get_bundled_model
from ubdb.engine import Evaluator, Scope, State
from ubdb.exceptions import EvaluationError
from ubdb.model import resolve
from ubdb.parser import load_chain


def _bindings(evaluator, event, state):
    names = event.parameter_names
    if not names:
        yield {}
        return
    # typings may mention earlier parameters, so expand one parameter at a time
    partial = [{}]
    for parameter in event.parameters:
        extended = []
        for binding in partial:
            try:
                values = evaluator.evaluate(parameter.typing, state, binding)
            except EvaluationError:
                continue
            for value in values:
                extended.append({**binding, parameter.name: value})
        partial = extended
    yield from partial


def _enabled(evaluator, event, state, binding):
    try:
        return all(evaluator.holds(g.predicate, state, binding) for g in event.guards)
    except EvaluationError:
        return False


def _successor(evaluator, event, state, binding):
    changes = {a.target: evaluator.evaluate(a.expression, state, binding) for a in event.actions}
    return state.updated(changes)


def oracle_reachable(machine, scope):
    evaluator = Evaluator.for_machine(machine, scope)
    initial = State.empty(machine.variable_names)
    seen = {initial}
    frontier = [initial]
    while frontier:
        following = []
        for state in frontier:
            for event in machine.events:
                for binding in _bindings(evaluator, event, state):
                    if not _enabled(evaluator, event, state, binding):
                        continue
                    post = _successor(evaluator, event, state, binding)
                    if post not in seen:
                        seen.add(post)
                        following.append(post)
        frontier = following
    return frozenset(seen)


RANDOM_MODELS = 24
ARROWS = ("<->", "-->", "+->", ">->")


def _constructor(rng, cls, carrier, relations):
    params = [f"this_{cls} : {carrier}"]
    acts = [f"{cls} := {cls} \\/ {{this_{cls}}}"]
    for name, source, target, _ in relations:
        if source == cls and target != cls and rng.random() < 0.5:
            params.append(f"t_{name} : {target}")
            acts.append(f"{name} := {name} \\/ {{this_{cls} |-> t_{name}}}")
    return _event(f"add{cls}", params, [f"this_{cls} /: {cls}"], acts, f" constructor of {cls}")


def _destructor(cls, relations):
    acts = [f"{cls} := {cls} \\ {{a}}"]
    acts += [f"{name} := {{a}} <-| {name}" for name, source, _, _ in relations if source == cls]
    return _event(f"remove{cls}", [f"a : {cls}"], [], acts, f" destructor of {cls}")


def _relation_events(rng, name, source, target):
    pair = "a |-> b"
    params = [f"a : {source}", f"b : {target}"]
    link_guards = [f"{pair} /: {name}"] if rng.random() < 0.5 else []
    return [
        _event(f"link_{name}", params, link_guards, [f"{name} := {name} \\/ {{{pair}}}"]),
        _event(f"unlink_{name}", params, [f"{pair} : {name}"], [f"{name} := {name} \\ {{{pair}}}"]),
        _event(f"set_{name}", params, [], [f"{name} := {name} <+ {{{pair}}}"]),
    ]


def _event(name, params, guards, acts, kind=""):
    lines = [f"  event {name}{kind}"]
    if params:
        lines.append(f"    any {', '.join(params)}")
    if guards:
        lines.append("    where")
        lines += [f"      @grd{i} {g}" for i, g in enumerate(guards, start=1)]
    lines.append("    then")
    lines += [f"      @act{i} {a}" for i, a in enumerate(acts, start=1)]
    lines.append("  end")
    return "\n".join(lines)


def random_model(seed: int) -> str:
    """A machine with up to two classes, two associations and four events"""
    rng = random.Random(seed)
    classes = ["K1", "K2"][: rng.randint(1, 2)]
    carriers = {cls: f"{cls}_SET" for cls in classes}
    relations = [
        (f"r{i}", rng.choice(classes), rng.choice(classes), rng.choice(ARROWS))
        for i in range(1, rng.randint(0, 2) + 1)
    ]
    optional = [_destructor(cls, relations) for cls in classes]
    optional += [_constructor(rng, cls, carriers[cls], relations) for cls in classes[1:]]
    for name, source, target, _ in relations:
        optional += _relation_events(rng, name, source, target)
    events = [_constructor(rng, classes[0], carriers[classes[0]], relations)]
    events += rng.sample(optional, min(len(optional), rng.randint(1, 3)))

    lines = ["context Random_ctx", f"  sets {' '.join(carriers.values())}", "end", ""]
    lines += ["machine Random", "  sees Random_ctx"]
    lines += [f"  class {cls} : {carrier} kind primary" for cls, carrier in carriers.items()]
    lines += [f"  association {name} : {source} {arrow} {target}" for name, source, target, arrow in relations]
    lines += ["", "\n\n".join(events), "end", ""]
    return "\n".join(lines)


def _chain(text_or_name):
    if text_or_name in ("relation", "circular_partial", "circular_total", "sres"):
        return resolve(load_chain(get_bundled_model(text_or_name)))
    return resolve(load_chain(text_or_name))


class TestReachability:
    """Tests that the explorer reaches exactly the oracle's states"""

    @pytest.mark.parametrize(
        "bounds",
        [
            {"PERSON": 1, "DEPARTMENT": 1},
            {"PERSON": 2, "DEPARTMENT": 1},
            {"PERSON": 2, "DEPARTMENT": 2},
        ],
    )
    def test_dept(self, dept_chain, bounds):
        """Test the Dept model across scopes"""
        scope = Scope.for_chain(dept_chain, bounds)
        machine = dept_chain.machine("Dept")

        assert reachable_states(machine, scope) == oracle_reachable(machine, scope)

    def test_unguarded_dept(self, unguarded_dept_chain):
        """Test a model whose reachable set includes invariant-breaking states"""
        scope = Scope.for_chain(unguarded_dept_chain, {"PERSON": 2, "DEPARTMENT": 2})
        machine = unguarded_dept_chain.machine("Dept")

        assert reachable_states(machine, scope) == oracle_reachable(machine, scope)

    @pytest.mark.parametrize("name", ["circular_partial", "circular_total"])
    def test_circular_models(self, name):
        """Test models with mutually dependent constructors"""
        chain = _chain(name)
        scope = Scope.for_chain(chain, {"PERSON": 2, "DEPARTMENT": 2})
        machine = chain.last

        assert reachable_states(machine, scope) == oracle_reachable(machine, scope)

    def test_relation_model(self, relation_chain):
        """Test the relation model with queries and destructors"""
        scope = Scope.for_chain(relation_chain, {"A_SET": 1, "B_SET": 2, "X_VALUE": 2})
        machine = relation_chain.machine("Relation")

        assert reachable_states(machine, scope) == oracle_reachable(machine, scope)

    def test_refining_machine(self, refinement_text):
        """Test a machine whose events come from extends"""
        chain = _chain(refinement_text)
        scope = Scope.for_chain(chain, {"A_SET": 2, "X_VALUE": 2})
        machine = chain.machine("Conc")

        assert reachable_states(machine, scope) == oracle_reachable(machine, scope)

    @pytest.mark.parametrize("seed", range(RANDOM_MODELS))
    def test_random_models(self, seed):
        """Test generated models at two atoms per carrier"""
        machine = _chain(random_model(seed)).machine("Random")
        scope = Scope.uniform(machine.carriers, 2)

        assert reachable_states(machine, scope) == oracle_reachable(machine, scope)


class TestInvariantVerdicts:
    """Tests that INV verdicts agree with invariants evaluated on the oracle's states"""

    @pytest.mark.parametrize("fixture", ["dept_chain", "unguarded_dept_chain"])
    def test_violations_match(self, request, fixture):
        """Test an invariant is reported violated exactly when some reachable state breaks it"""
        chain = request.getfixturevalue(fixture)
        scope = Scope.for_chain(chain, {"PERSON": 2, "DEPARTMENT": 2})
        machine = chain.machine("Dept")
        evaluator = Evaluator.for_machine(machine, scope)
        states = oracle_reachable(machine, scope)

        broken = {
            invariant.label
            for invariant in machine.invariants
            if any(not evaluator.holds(invariant.predicate, state) for state in states)
        }
        reported = {
            r.obligation.invariant_label
            for r in check(chain, scope)
            if r.obligation.kind == INV and r.verdict == VIOLATED
        }

        assert reported == broken

    @pytest.mark.parametrize("seed", range(RANDOM_MODELS))
    def test_random_model_violations(self, seed):
        """Test reduced exploration reports exactly the invariants the oracle's states break"""
        chain = _chain(random_model(seed))
        machine = chain.machine("Random")
        scope = Scope.uniform(machine.carriers, 2)
        evaluator = Evaluator.for_machine(machine, scope)
        states = oracle_reachable(machine, scope)

        broken = {
            invariant.label
            for invariant in machine.invariants
            if any(not evaluator.holds(invariant.predicate, state) for state in states)
        }
        reported = {
            r.obligation.invariant_label
            for r in check(chain, scope)
            if r.obligation.kind == INV and r.verdict == VIOLATED
        }

        assert reported == broken

    def test_generator_covers_the_shapes(self):
        """Test the generated models vary in classes, associations and events"""
        machines = [_chain(random_model(seed)).machine("Random") for seed in range(RANDOM_MODELS)]

        assert {len(m.class_names) for m in machines} == {1, 2}
        assert {len(m.relations) for m in machines} == {0, 1, 2}
        assert max(len(m.events) for m in machines) <= 4
        assert len({tuple(e.name for e in m.events) for m in machines}) > 4
