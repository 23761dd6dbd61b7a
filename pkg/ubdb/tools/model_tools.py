"""
Model Tools

Parse, check, lint, format and compile models given as DSL text or as the
name of a bundled model. Every function returns a plain dictionary with a
`success` flag; library errors propagate to the caller.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Any, Dict, List, Mapping, Optional, Tuple

from ubdb.checker import HOLDS, CheckReport, ReportRecord, check, summarize
from ubdb.checker.runner import check_refinement_step
from ubdb.config import get_bundled_model, list_bundled_models
from ubdb.engine.values import Scope
from ubdb.exceptions import ModelError, UsageError
from ubdb.model.chain import ResolvedChain
from ubdb.model.resolve import resolve
from ubdb.model.typecheck import has_errors as has_type_errors
from ubdb.model.typecheck import typecheck
from ubdb.parser import load_chain, pretty_print
from ubdb.patterns import has_errors, lint_chain
from ubdb.sqlgen import generate_sql
from ubdb.utils.logger import get_logger

logger = get_logger()


def load_source(model: Optional[str] = None, source: Optional[str] = None) -> Tuple[str, str]:
    """
    DSL text and a display name for it.

    Args:
        model: Bundled model name (see list_models)
        source: DSL text

    Raises:
        UsageError: neither or both given, or the bundled model does not exist
    """
    if (model is None) == (source is None):
        raise UsageError(
            "Pass either 'model' (a bundled model name) or 'source' (DSL text)",
            suggestions=["Call list_models to see the bundled models"],
        )
    if source is not None:
        return source, "<source>"
    path = get_bundled_model(model)
    if not path.exists():
        raise UsageError(
            f"No bundled model named '{model}'",
            details={"models": list_bundled_models()},
            related_commands=["list_models"],
        )
    return path.read_text(encoding="utf-8"), path.name


def load_resolved(model: Optional[str] = None, source: Optional[str] = None) -> ResolvedChain:
    """Parsed, resolved and type-checked chain; type errors raise ModelError"""
    text, name = load_source(model, source)
    resolved = resolve(load_chain(text, name))
    diagnostics = typecheck(resolved)
    if has_type_errors(diagnostics):
        raise ModelError(
            f"{name} has type errors",
            details={"diagnostics": [str(d) for d in diagnostics]},
        )
    return resolved


def _scope(resolved: ResolvedChain, overrides: Optional[Mapping[str, int]]) -> Scope:
    known = {c for m in resolved.machines for c in m.carriers}
    unknown = sorted(set(overrides or {}) - known)
    if unknown:
        raise UsageError(f"Unknown carrier set(s) in scope: {', '.join(unknown)}", details={"carriers": sorted(known)})
    return Scope.for_chain(resolved, overrides)


def _verdicts(reports: List[CheckReport], scope: Scope) -> Dict[str, Any]:
    return {
        "success": True,
        "all_hold": all(r.verdict == HOLDS for r in reports),
        "scope": scope.as_dict(),
        "summary": summarize(reports),
        "reports": [ReportRecord.from_report(r).model_dump() for r in reports],
    }


def list_models() -> Dict[str, Any]:
    """Bundled models with their machines"""
    models = []
    for name in list_bundled_models():
        try:
            chain = load_chain(get_bundled_model(name))
            machines = [m.name for m in chain.machines]
        except Exception as e:
            logger.warning(f"Bundled model {name} does not parse: {e}")
            machines = []
        models.append({"name": name, "uri": f"models://{name}", "machines": machines})
    return {"success": True, "models": models}


def check_model(
    model: Optional[str] = None,
    source: Optional[str] = None,
    scope: Optional[Mapping[str, int]] = None,
    budget: Optional[int] = None,
    machine: Optional[str] = None,
) -> Dict[str, Any]:
    """INV and FEAS verdicts for every machine (or one)"""
    resolved = load_resolved(model, source)
    bounds = _scope(resolved, scope)
    return _verdicts(check(resolved, bounds, machine=machine, budget=budget), bounds)


def refine_check_model(
    model: Optional[str] = None,
    source: Optional[str] = None,
    scope: Optional[Mapping[str, int]] = None,
    budget: Optional[int] = None,
    machine: Optional[str] = None,
) -> Dict[str, Any]:
    """GRD, SIM and GLU verdicts for every refinement step (or the one ending at `machine`)"""
    resolved = load_resolved(model, source)
    bounds = _scope(resolved, scope)
    steps = [(a, c) for a, c in resolved.refinement_steps() if machine is None or c.name == machine]
    reports: List[CheckReport] = []
    for abstract, concrete in steps:
        reports.extend(check_refinement_step(abstract, concrete, bounds, budget))
    result = _verdicts(reports, bounds)
    result["steps"] = [f"{a.name} -> {c.name}" for a, c in steps]
    return result


def lint_model(model: Optional[str] = None, source: Optional[str] = None, strict: bool = False) -> Dict[str, Any]:
    findings = lint_chain(load_resolved(model, source))
    return {
        "success": True,
        "passed": not has_errors(findings, strict=strict),
        "findings": [f.model_dump() for f in findings],
    }


def format_model(model: Optional[str] = None, source: Optional[str] = None) -> Dict[str, Any]:
    text, name = load_source(model, source)
    return {"success": True, "text": pretty_print(load_chain(text, name))}


def generate_sql_script(
    model: Optional[str] = None,
    source: Optional[str] = None,
    dialect: Optional[str] = None,
    machine: Optional[str] = None,
    scope: Optional[Mapping[str, int]] = None,
    budget: Optional[int] = None,
    force: bool = False,
) -> Dict[str, Any]:
    """
    SQL script and manifest, refused unless every obligation holds.

    Returns:
        {"success", "generated", "sql", "manifest"} or, when refused,
        {"success", "generated": False, "failing": [report records]}
    """
    resolved = load_resolved(model, source)
    bounds = _scope(resolved, scope)
    target = resolved.machine(machine) if machine else resolved.last
    if target is None:
        raise UsageError(f"No machine named '{machine}'", details={"machines": [m.name for m in resolved.machines]})

    if not force:
        names = [m.name for m in resolved.machines]
        prefix = names[: names.index(target.name) + 1]
        reports: List[CheckReport] = []
        for name in prefix:
            reports.extend(check(resolved, bounds, machine=name, budget=budget))
        for abstract, concrete in resolved.refinement_steps():
            if concrete.name in prefix:
                reports.extend(check_refinement_step(abstract, concrete, bounds, budget))
        failing = [r for r in reports if r.verdict != HOLDS]
        if failing:
            logger.info(f"generate_sql_script: refused, {len(failing)} obligation(s) do not hold")
            return {
                "success": True,
                "generated": False,
                "scope": bounds.as_dict(),
                "failing": [ReportRecord.from_report(r).model_dump() for r in failing],
            }

    script = generate_sql(
        resolved,
        dialect=dialect,
        machine=target.name,
        scope=bounds.as_dict(),
        verified=not force,
        forced=force,
    )
    return {
        "success": True,
        "generated": True,
        "sql": script.text(),
        "manifest": script.manifest.model_dump() if script.manifest else None,
    }


def class_diagram(model: Optional[str] = None, source: Optional[str] = None, machine: Optional[str] = None) -> Dict[str, Any]:
    from ubdb.tools.class_diagram import class_diagram_data, render_class_diagram

    resolved = load_resolved(model, source)
    target = resolved.machine(machine) if machine else resolved.last
    if target is None:
        raise UsageError(f"No machine named '{machine}'", details={"machines": [m.name for m in resolved.machines]})
    image = render_class_diagram(target)
    return {
        "success": image is not None,
        "diagram": class_diagram_data(target),
        "image_base64": image,
        "error": None if image is not None else "class diagram could not be rendered (is matplotlib installed?)",
    }
