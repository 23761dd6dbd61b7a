"""
Name resolution for refinement chains

Computes each machine's effective vocabulary (own declarations plus those
inherited from the abstraction it refines), expands event extends links and
generates the typing and inheritance invariants implied by declarations.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from ubdb.exceptions import (
    CyclicRefinementError,
    DuplicateNameError,
    ExtendMismatchError,
    RefinementOrderError,
    UnresolvedNameError,
)
from ubdb.model.ast import (
    SUBSET,
    Context,
    Event,
    FunctionClass,
    Invariant,
    Machine,
    Name,
    Quantifier,
    RefinementChain,
    Relational,
    RelationTyping,
    children,
    free_names,
)
from ubdb.model.chain import (
    ORIGIN_EXTENDS,
    ORIGIN_INHERITED,
    ORIGIN_NEW,
    ORIGIN_REFINES,
    ResolvedChain,
    ResolvedEvent,
    ResolvedMachine,
)
from ubdb.utils.logger import get_logger

logger = get_logger()


def resolve(chain: Union[RefinementChain, ResolvedChain]) -> ResolvedChain:
    """
    Bind every name in a chain and compute effective machine vocabularies.

    Accepts an already resolved chain, in which case the result is
    structurally identical to the input.

    Raises:
        UnresolvedNameError, DuplicateNameError, CyclicRefinementError,
        RefinementOrderError, ExtendMismatchError
    """
    if isinstance(chain, ResolvedChain):
        chain = chain.chain

    _check_component_names(chain)
    _check_cycles(
        {c.name: c.extends for c in chain.contexts}, "context extends", chain.contexts
    )
    _check_cycles(
        {m.name: m.refines for m in chain.machines}, "machine refines", chain.machines
    )
    _check_context_order(chain.contexts)
    _check_global_names(chain)

    resolved: List[ResolvedMachine] = []
    previous: Optional[ResolvedMachine] = None
    for machine in chain.machines:
        abstract = None
        if machine.refines is not None:
            if previous is None or previous.name != machine.refines:
                raise RefinementOrderError(
                    f"Machine '{machine.name}' refines '{machine.refines}', "
                    f"which is not the machine immediately before it",
                    component=machine.name,
                    span=machine.span,
                )
            abstract = previous
        current = _resolve_machine(chain, machine, abstract)
        resolved.append(current)
        previous = current

    logger.debug(f"Resolved chain with {len(resolved)} machine(s)")
    return ResolvedChain(chain=chain, machines=tuple(resolved))


# --- structural checks ----------------------------------------------------


def _check_component_names(chain: RefinementChain) -> None:
    seen: Dict[str, object] = {}
    for component in tuple(chain.contexts) + tuple(chain.machines):
        if component.name in seen:
            raise DuplicateNameError(
                f"Component name '{component.name}' is declared twice",
                name=component.name,
                component=component.name,
                span=component.span,
            )
        seen[component.name] = component


def _check_cycles(edges: Dict[str, Optional[str]], what: str, components: Sequence) -> None:
    for start in edges:
        path = [start]
        current = edges.get(start)
        while current is not None and current in edges:
            if current in path:
                cycle = path[path.index(current):] + [current]
                span = next((c.span for c in components if c.name == start), None)
                raise CyclicRefinementError(
                    f"Cyclic {what}: {' -> '.join(cycle)}",
                    cycle=cycle,
                    component=start,
                    span=span,
                )
            path.append(current)
            current = edges.get(current)


def _check_context_order(contexts: Sequence[Context]) -> None:
    earlier: Set[str] = set()
    names = {c.name for c in contexts}
    for context in contexts:
        if context.extends is not None:
            if context.extends not in names:
                raise UnresolvedNameError(
                    f"Context '{context.name}' extends unknown context '{context.extends}'",
                    name=context.extends,
                    component=context.name,
                    span=context.span,
                )
            if context.extends not in earlier:
                raise RefinementOrderError(
                    f"Context '{context.name}' extends '{context.extends}', "
                    f"which is declared later in the chain",
                    component=context.name,
                    span=context.span,
                )
        earlier.add(context.name)


def _check_global_names(chain: RefinementChain) -> None:
    """Carrier sets, constants and variables share one namespace per chain"""
    owners: Dict[str, str] = {}

    def claim(name: str, owner: str, span) -> None:
        if name in owners:
            raise DuplicateNameError(
                f"Name '{name}' declared in '{owner}' is already declared in '{owners[name]}'",
                name=name,
                component=owner,
                span=span,
            )
        owners[name] = owner

    for context in chain.contexts:
        for carrier in context.carrier_sets:
            claim(carrier, context.name, context.span)
        for constant in context.constants:
            claim(constant.name, context.name, constant.span)
    for machine in chain.machines:
        for decl in machine.variables:
            claim(decl.name, machine.name, decl.span)


# --- per machine ----------------------------------------------------------


def _visible_contexts(chain: RefinementChain, names: Sequence[str], component: str) -> List[Context]:
    ordered: List[str] = []

    def visit(name: str) -> None:
        context = chain.context(name)
        if context is None:
            raise UnresolvedNameError(
                f"Machine '{component}' sees unknown context '{name}'",
                name=name,
                component=component,
            )
        if context.extends:
            visit(context.extends)
        if name not in ordered:
            ordered.append(name)

    for name in names:
        visit(name)
    # keep chain order for deterministic carrier listings
    return [c for c in chain.contexts if c.name in ordered]


def _resolve_machine(
    chain: RefinementChain, machine: Machine, abstract: Optional[ResolvedMachine]
) -> ResolvedMachine:
    seen_names = list(abstract.contexts) if abstract else []
    for name in machine.sees:
        if name not in seen_names:
            seen_names.append(name)
    contexts = _visible_contexts(chain, seen_names, machine.name)

    carriers = tuple(c for ctx in contexts for c in ctx.carrier_sets)
    constants = tuple(k for ctx in contexts for k in ctx.constants)
    axioms = tuple(a for ctx in contexts for a in ctx.axioms)

    inherited_vars = abstract.variables if abstract else ()
    inherited_names = {v.name for v in inherited_vars}
    for name in machine.removed:
        if name not in inherited_names:
            raise UnresolvedNameError(
                f"Machine '{machine.name}' removes '{name}', which its abstraction does not declare",
                name=name,
                component=machine.name,
                span=machine.span,
            )
    removed = set(machine.removed)
    variables = tuple(v for v in inherited_vars if v.name not in removed) + machine.variables
    var_names = {v.name for v in variables}

    inherited_annotations = abstract.annotations if abstract else ()
    annotations = (
        tuple(a for a in inherited_annotations if a.class_name not in removed)
        + machine.annotations
    )
    class_names = {v.name for v in variables if v.is_class}
    for annotation in machine.annotations:
        if annotation.supertype is not None and annotation.supertype not in class_names:
            raise UnresolvedNameError(
                f"Class '{annotation.class_name}' extends unknown class '{annotation.supertype}'",
                name=annotation.supertype,
                component=machine.name,
                span=annotation.span,
            )

    constant_names = {k.name for k in constants}
    globals_ = set(carriers) | constant_names | var_names
    for decl in machine.variables:
        if isinstance(decl.typing, RelationTyping):
            for end in (decl.typing.source, decl.typing.target):
                if end not in globals_:
                    raise UnresolvedNameError(
                        f"Declaration of '{decl.name}' refers to unknown '{end}'",
                        name=end,
                        component=machine.name,
                        span=decl.span,
                    )
        elif decl.typing.carrier not in carriers:
            raise UnresolvedNameError(
                f"Class '{decl.name}' is typed by unknown carrier set '{decl.typing.carrier}'",
                name=decl.typing.carrier,
                component=machine.name,
                span=decl.span,
            )

    # invariants
    inherited_invs = abstract.declared_invariants if abstract else ()
    kept = tuple(i for i in inherited_invs if not (free_names(i.predicate) & removed))
    own_visible = globals_ | removed
    for invariant in machine.invariants:
        _check_names(invariant.predicate, own_visible, machine.name, f"invariant {invariant.label}")
    own_state = tuple(i for i in machine.invariants if not (free_names(i.predicate) & removed))
    gluing = tuple(machine.invariants) if removed else ()
    typing_invs = _typing_invariants(variables, annotations)
    declared = kept + own_state

    _check_unique_labels(typing_invs + declared, machine.name)
    _check_unique_labels(kept + tuple(machine.invariants), machine.name)

    events = _resolve_events(machine, abstract, globals_)

    return ResolvedMachine(
        name=machine.name,
        abstract=abstract.name if abstract else None,
        layer=machine.layer,
        contexts=tuple(c.name for c in contexts),
        carriers=carriers,
        constants=constants,
        axioms=axioms,
        variables=variables,
        annotations=annotations,
        removed=tuple(machine.removed),
        abstract_variables=abstract.variable_names if abstract else (),
        typing_invariants=typing_invs,
        declared_invariants=declared,
        gluing=gluing,
        events=events,
        source=machine,
    )


def _check_unique_labels(invariants: Sequence[Invariant], component: str) -> None:
    seen: Set[str] = set()
    for invariant in invariants:
        if invariant.label in seen:
            raise DuplicateNameError(
                f"Invariant label '{invariant.label}' is used twice in '{component}'",
                name=invariant.label,
                component=component,
                span=invariant.span,
            )
        seen.add(invariant.label)


def _typing_invariants(variables, annotations) -> Tuple[Invariant, ...]:
    """type_<f> for every attribute/association, sub_<C> for every subclass"""
    generated = []
    for decl in variables:
        if isinstance(decl.typing, RelationTyping):
            generated.append(
                Invariant(
                    f"type_{decl.name}",
                    FunctionClass(
                        Name(decl.name),
                        Name(decl.typing.source),
                        Name(decl.typing.target),
                        decl.typing.kind,
                    ),
                )
            )
    for annotation in annotations:
        if annotation.supertype is not None:
            generated.append(
                Invariant(
                    f"sub_{annotation.class_name}",
                    Relational(SUBSET, Name(annotation.class_name), Name(annotation.supertype)),
                )
            )
    return tuple(generated)


def _check_names(node, visible: Set[str], component: str, where: str) -> None:
    if isinstance(node, Name):
        if node.name not in visible:
            raise UnresolvedNameError(
                f"Unknown identifier '{node.name}' in {where} of '{component}'",
                name=node.name,
                component=component,
                span=node.span,
            )
        return
    if isinstance(node, Quantifier):
        inner = set(visible)
        for binder in node.binders:
            _check_names(binder.typing, inner, component, where)
            inner.add(binder.name)
        _check_names(node.body, inner, component, where)
        return
    for child in children(node):
        _check_names(child, visible, component, where)


def _merge_extended(event: Event, base: ResolvedEvent, machine: str) -> ResolvedEvent:
    base_params = set(base.parameter_names)
    for parameter in event.parameters:
        if parameter.name in base_params:
            raise DuplicateNameError(
                f"Event '{event.name}' redeclares parameter '{parameter.name}' of '{base.name}'",
                name=parameter.name,
                component=machine,
                span=parameter.span,
            )
    kind, owner = _kind_and_owner(event, base)
    return ResolvedEvent(
        name=event.name,
        kind=kind,
        class_owner=owner,
        parameters=base.parameters + event.parameters,
        guards=base.guards + event.guards,
        actions=base.actions + event.actions,
        origin=ORIGIN_EXTENDS,
        abstract=base.name,
    )


def _kind_and_owner(event: Event, base: ResolvedEvent):
    """Refining events keep the abstract kind and owner unless they declare their own"""
    if event.kind == "normal" and event.class_owner is None:
        return base.kind, base.class_owner
    return event.kind, event.class_owner or base.class_owner


def _own_event(event: Event, origin: str = ORIGIN_NEW, base: Optional[ResolvedEvent] = None):
    kind, owner = (event.kind, event.class_owner)
    if base is not None:
        kind, owner = _kind_and_owner(event, base)
    return ResolvedEvent(
        name=event.name,
        kind=kind,
        class_owner=owner,
        parameters=event.parameters,
        guards=event.guards,
        actions=event.actions,
        origin=origin,
        abstract=base.name if base is not None else None,
    )


def _resolve_events(
    machine: Machine, abstract: Optional[ResolvedMachine], globals_: Set[str]
) -> Tuple[ResolvedEvent, ...]:
    abstract_events = {e.name: e for e in abstract.events} if abstract else {}
    replacing: Dict[str, List[Event]] = {}
    fresh: List[Event] = []

    for event in machine.events:
        target = event.extends or event.refines
        if event.extends and event.refines:
            raise ExtendMismatchError(
                f"Event '{event.name}' cannot both extend and refine",
                event=event.name,
                component=machine.name,
                span=event.span,
            )
        if target is not None:
            if target not in abstract_events:
                raise ExtendMismatchError(
                    f"Event '{event.name}' {'extends' if event.extends else 'refines'} "
                    f"'{target}', which is not an event of the abstract machine",
                    event=event.name,
                    component=machine.name,
                    span=event.span,
                )
            replacing.setdefault(target, []).append(event)
        else:
            if event.name in abstract_events:
                raise DuplicateNameError(
                    f"Event '{event.name}' repeats an abstract event; use extends or refines",
                    name=event.name,
                    component=machine.name,
                    span=event.span,
                )
            fresh.append(event)

    result: List[ResolvedEvent] = []
    for name, base in abstract_events.items():
        if name not in replacing:
            result.append(
                ResolvedEvent(
                    name=base.name,
                    kind=base.kind,
                    class_owner=base.class_owner,
                    parameters=base.parameters,
                    guards=base.guards,
                    actions=base.actions,
                    origin=ORIGIN_INHERITED,
                    abstract=base.name,
                )
            )
            continue
        for event in replacing[name]:
            if event.extends:
                result.append(_merge_extended(event, base, machine.name))
            else:
                result.append(_own_event(event, ORIGIN_REFINES, base))
    result.extend(_own_event(e) for e in fresh)

    names: Set[str] = set()
    for event in result:
        if event.name in names:
            raise DuplicateNameError(
                f"Event name '{event.name}' is used twice in '{machine.name}'",
                name=event.name,
                component=machine.name,
            )
        names.add(event.name)

    own = {e.name for e in machine.events}
    for event in result:
        if event.name not in own:
            continue
        visible = set(globals_)
        for parameter in event.parameters:
            if parameter.name in globals_:
                raise DuplicateNameError(
                    f"Parameter '{parameter.name}' of '{event.name}' shadows a declared name",
                    name=parameter.name,
                    component=machine.name,
                    span=parameter.span,
                )
        for parameter in event.parameters:
            _check_names(parameter.typing, globals_, machine.name, f"event {event.name}")
            visible.add(parameter.name)
        for guard in event.guards:
            _check_names(guard.predicate, visible, machine.name, f"guard {event.name}/{guard.label}")
        for action in event.actions:
            if action.target not in globals_:
                raise UnresolvedNameError(
                    f"Action {event.name}/{action.label} assigns undeclared '{action.target}'",
                    name=action.target,
                    component=machine.name,
                    span=action.span,
                )
            _check_names(
                action.expression, visible, machine.name, f"action {event.name}/{action.label}"
            )
    return tuple(result)
