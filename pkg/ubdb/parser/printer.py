"""
Canonical pretty printer for refinement chains

Output uses LF line endings and two-space indentation; parsing the output
gives back a structurally identical chain.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import List, Union

from ubdb.model import ast

INDENT = "  "

# expression precedence: higher binds tighter
_MAPLET, _SETOP, _POSTFIX, _PRIMARY = 1, 2, 3, 4

# predicate precedence
_QUANT, _EQUIV, _IMPLIES, _OR, _AND, _NOT, _ATOM = 0, 1, 2, 3, 4, 5, 6

_PRED_LEVEL = {ast.EQUIV: _EQUIV, ast.IMPLIES: _IMPLIES, ast.OR: _OR, ast.AND: _AND}


def _expr_level(expr: ast.Expression) -> int:
    if isinstance(expr, ast.Maplet):
        return _MAPLET
    if isinstance(expr, ast.BinaryExpr):
        return _SETOP
    if isinstance(expr, (ast.Image, ast.Apply)):
        return _POSTFIX
    if isinstance(expr, ast.UnaryExpr) and expr.op == ast.INVERSE:
        return _POSTFIX
    return _PRIMARY


def format_expression(expr: ast.Expression, minimum: int = _MAPLET) -> str:
    """Render an expression, parenthesised when its precedence is below minimum"""
    text = _format_expression(expr)
    if _expr_level(expr) < minimum:
        return f"({text})"
    return text


def _format_expression(expr: ast.Expression) -> str:
    if isinstance(expr, ast.Name):
        return expr.name
    if isinstance(expr, ast.AtomLit):
        return f"{expr.carrier}.{expr.index}"
    if isinstance(expr, ast.SetExt):
        return "{" + ", ".join(format_expression(e) for e in expr.elements) + "}"
    if isinstance(expr, ast.Maplet):
        return f"{format_expression(expr.left, _MAPLET)} |-> {format_expression(expr.right, _SETOP)}"
    if isinstance(expr, ast.BinaryExpr):
        left = format_expression(expr.left, _SETOP)
        right = format_expression(expr.right, _POSTFIX)
        return f"{left} {expr.op} {right}"
    if isinstance(expr, ast.UnaryExpr):
        if expr.op == ast.INVERSE:
            return f"{format_expression(expr.operand, _POSTFIX)}~"
        return f"{expr.op}({format_expression(expr.operand)})"
    if isinstance(expr, ast.Image):
        return f"{format_expression(expr.relation, _POSTFIX)}[{format_expression(expr.argument)}]"
    if isinstance(expr, ast.Apply):
        return f"{format_expression(expr.function, _POSTFIX)}({format_expression(expr.argument)})"
    raise TypeError(f"not an expression: {expr!r}")


def _pred_level(pred: ast.Predicate) -> int:
    if isinstance(pred, ast.Quantifier):
        return _QUANT
    if isinstance(pred, ast.BinaryPred):
        return _PRED_LEVEL[pred.op]
    if isinstance(pred, ast.Not):
        return _NOT
    return _ATOM


def format_predicate(pred: ast.Predicate, minimum: int = _QUANT) -> str:
    text = _format_predicate(pred)
    if _pred_level(pred) < minimum:
        return f"({text})"
    return text


def _format_predicate(pred: ast.Predicate) -> str:
    if isinstance(pred, ast.Truth):
        return "true" if pred.value else "false"
    if isinstance(pred, ast.Relational):
        return f"{format_expression(pred.left)} {pred.op} {format_expression(pred.right)}"
    if isinstance(pred, ast.FunctionClass):
        return (
            f"{format_expression(pred.element)} : {format_expression(pred.source)} "
            f"{pred.kind.arrow} {format_expression(pred.target)}"
        )
    if isinstance(pred, ast.Not):
        return f"not {format_predicate(pred.operand, _NOT)}"
    if isinstance(pred, ast.BinaryPred):
        level = _PRED_LEVEL[pred.op]
        if pred.op == ast.IMPLIES:
            left, right = level + 1, level
        else:
            left, right = level, level + 1
        return (
            f"{format_predicate(pred.left, max(left, _EQUIV))} {pred.op} "
            f"{format_predicate(pred.right, max(right, _EQUIV))}"
        )
    if isinstance(pred, ast.Quantifier):
        binders = ", ".join(f"{b.name} : {format_expression(b.typing)}" for b in pred.binders)
        return f"{pred.kind}{binders} . {format_predicate(pred.body)}"
    raise TypeError(f"not a predicate: {pred!r}")


def format_node(node: Union[ast.Expression, ast.Predicate]) -> str:
    if isinstance(node, (ast.Truth, ast.Relational, ast.FunctionClass, ast.Not, ast.BinaryPred, ast.Quantifier)):
        return format_predicate(node)
    return format_expression(node)


def _declaration(decl: ast.VariableDecl, machine: ast.Machine) -> str:
    if isinstance(decl.typing, ast.ClassTyping):
        annotation = machine.annotation_for(decl.name)
        kind = annotation.kind if annotation else "primary"
        text = f"class {decl.name} : {decl.typing.carrier} kind {kind}"
        if annotation and annotation.supertype:
            text += f" extends {annotation.supertype}"
        return text
    keyword = "attribute" if decl.role == ast.ROLE_ATTRIBUTE else "association"
    typing = decl.typing
    text = f"{keyword} {decl.name} : {typing.source} {typing.kind.arrow} {typing.target}"
    if typing.kind.injective and typing.kind.arrow == "<->":
        text += " injective"
    return text


def _event_lines(event: ast.Event) -> List[str]:
    header = f"event {event.name}"
    if event.kind != "normal":
        header += f" {event.kind}"
    if event.class_owner:
        header += f" of {event.class_owner}"
    if event.extends:
        header += f" extends {event.extends}"
    if event.refines:
        header += f" refines {event.refines}"
    lines = [INDENT + header]
    if event.parameters:
        params = ", ".join(f"{p.name} : {format_expression(p.typing)}" for p in event.parameters)
        lines.append(INDENT * 2 + f"any {params}")
    if event.guards:
        lines.append(INDENT * 2 + "where")
        for guard in event.guards:
            lines.append(INDENT * 3 + f"@{guard.label} {format_predicate(guard.predicate)}")
    if event.actions:
        lines.append(INDENT * 2 + "then")
        for action in event.actions:
            lines.append(
                INDENT * 3 + f"@{action.label} {action.target} := {format_expression(action.expression)}"
            )
    lines.append(INDENT + "end")
    return lines


def _context_lines(context: ast.Context) -> List[str]:
    header = f"context {context.name}"
    if context.extends:
        header += f" extends {context.extends}"
    lines = [header]
    if context.carrier_sets:
        lines.append(INDENT + "sets " + " ".join(context.carrier_sets))
    if context.constants:
        lines.append(INDENT + "constants")
        for constant in context.constants:
            lines.append(INDENT * 2 + f"{constant.name} = {format_expression(constant.value)}")
    if context.axioms:
        lines.append(INDENT + "axioms")
        for axiom in context.axioms:
            lines.append(INDENT * 2 + f"@{axiom.label} {format_predicate(axiom.predicate)}")
    lines.append("end")
    return lines


def _machine_lines(machine: ast.Machine) -> List[str]:
    header = f"machine {machine.name}"
    if machine.refines:
        header += f" refines {machine.refines}"
    if machine.sees:
        header += " sees " + ", ".join(machine.sees)
    lines = [header]
    if machine.layer:
        lines.append(INDENT + f"layer {machine.layer}")
    if machine.removed:
        lines.append(INDENT + "removes " + ", ".join(machine.removed))
    for decl in machine.variables:
        lines.append(INDENT + _declaration(decl, machine))
    for invariant in machine.invariants:
        lines.append(INDENT + f"invariant @{invariant.label} {format_predicate(invariant.predicate)}")
    for event in machine.events:
        lines.append("")
        lines.extend(_event_lines(event))
    lines.append("end")
    return lines


def pretty_print(chain: ast.RefinementChain) -> str:
    """Canonical text of a chain: contexts first, then machines in refinement order"""
    blocks = [_context_lines(c) for c in chain.contexts]
    blocks += [_machine_lines(m) for m in chain.machines]
    return "\n\n".join("\n".join(block) for block in blocks) + ("\n" if blocks else "")
