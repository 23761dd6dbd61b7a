"""
Flatten a refinement chain to the machine code is generated from

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Optional

from ubdb.exceptions import PatternError, UnannotatedClassError, UsageError
from ubdb.model.chain import ResolvedMachine
from ubdb.model.resolve import resolve
from ubdb.utils.logger import get_logger

logger = get_logger()


def flatten(chain, machine: Optional[str] = None) -> ResolvedMachine:
    """
    Single machine carrying the final vocabulary of the chain.

    Resolution already expands extended events into their full parameter,
    guard and action lists and drops variables removed by data refinement,
    so the most concrete machine is the flattened one.

    Args:
        chain: RefinementChain or ResolvedChain
        machine: Machine to flatten instead of the last one

    Raises:
        UsageError: unknown machine name
        PatternError: the chain has no machine
        UnannotatedClassError: a class-instance-set has no kind annotation
    """
    resolved = resolve(chain)
    if not resolved.machines:
        raise PatternError("The chain has no machine to generate code from")
    if machine is None:
        target = resolved.last
    else:
        target = resolved.machine(machine)
        if target is None:
            raise UsageError(
                f"Unknown machine '{machine}'",
                suggestions=[f"Machines: {', '.join(m.name for m in resolved.machines)}"],
            )
    for name in target.class_names:
        if target.annotation(name) is None:
            raise UnannotatedClassError(f"Class '{name}' has no kind annotation", class_name=name)
    logger.debug(
        f"flatten: {target.name} with {len(target.variables)} variable(s), {len(target.events)} event(s)"
    )
    return target
