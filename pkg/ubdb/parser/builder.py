"""
Lark parse tree -> model AST

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import List, Optional

from lark import Token, Transformer, v_args

from ubdb.model import ast
from ubdb.parser.diagnostics import ERROR, ParseDiagnostic, SourceSpan


class _Clause:
    """Tagged intermediate value for optional clauses"""

    __slots__ = ("tag", "value", "span")

    def __init__(self, tag: str, value, span=None):
        self.tag = tag
        self.value = value
        self.span = span


@v_args(meta=True)
class ChainBuilder(Transformer):
    """Builds AST nodes and collects semantic diagnostics (duplicate sections, unknown kinds)"""

    def __init__(self, filename: str):
        super().__init__()
        self.filename = filename
        self.diagnostics: List[ParseDiagnostic] = []

    # --- helpers ---------------------------------------------------------

    def _span(self, meta) -> Optional[SourceSpan]:
        if meta is None or getattr(meta, "empty", True):
            return None
        length = max(0, meta.end_pos - meta.start_pos)
        return SourceSpan(self.filename, meta.line, meta.column, length)

    def _token_span(self, token: Token) -> SourceSpan:
        return SourceSpan(self.filename, token.line or 1, token.column or 1, len(token.value))

    def _error(self, span: Optional[SourceSpan], message: str) -> None:
        span = span or SourceSpan(self.filename, 1, 1, 0)
        self.diagnostics.append(ParseDiagnostic(span, ERROR, message))

    # --- top level -------------------------------------------------------

    def start(self, meta, children):
        contexts = tuple(c for c in children if isinstance(c, ast.Context))
        machines = tuple(c for c in children if isinstance(c, ast.Machine))
        return ast.RefinementChain(contexts=contexts, machines=machines)

    def context(self, meta, children):
        name = str(children[0])
        extends = None
        sections = {}
        for child in children[1:]:
            if child.tag == "extends":
                extends = child.value
                continue
            if child.tag in sections:
                self._error(child.span, f"duplicate section '{child.tag}' in context '{name}'")
                continue
            sections[child.tag] = child.value
        return ast.Context(
            name=name,
            extends=extends,
            carrier_sets=tuple(sections.get("sets", ())),
            constants=tuple(sections.get("constants", ())),
            axioms=tuple(sections.get("axioms", ())),
            span=self._span(meta),
        )

    def ctx_extends(self, meta, children):
        return _Clause("extends", str(children[0]), self._span(meta))

    def sets_section(self, meta, children):
        return _Clause("sets", [str(t) for t in children], self._span(meta))

    def constants_section(self, meta, children):
        return _Clause("constants", list(children), self._span(meta))

    def constant_def(self, meta, children):
        return ast.Constant(str(children[0]), children[1], self._span(meta))

    def axioms_section(self, meta, children):
        axioms = [ast.Axiom(label, pred, span) for label, pred, span in children]
        return _Clause("axioms", axioms, self._span(meta))

    def labelled_pred(self, meta, children):
        return str(children[0])[1:], children[1], self._span(meta)

    # --- machines --------------------------------------------------------

    def machine(self, meta, children):
        name = str(children[0])
        refines = None
        sees: tuple = ()
        layer = None
        removed: list = []
        seen_sections = set()
        variables, annotations, invariants, events = [], [], [], []
        for child in children[1:]:
            if isinstance(child, _Clause):
                if child.tag in ("layer", "removes"):
                    if child.tag in seen_sections:
                        self._error(child.span, f"duplicate section '{child.tag}' in machine '{name}'")
                        continue
                    seen_sections.add(child.tag)
                if child.tag == "refines":
                    refines = child.value
                elif child.tag == "sees":
                    sees = tuple(child.value)
                elif child.tag == "layer":
                    layer = child.value
                elif child.tag == "removes":
                    removed = list(child.value)
                elif child.tag == "class":
                    decl, annotation = child.value
                    variables.append(decl)
                    annotations.append(annotation)
                elif child.tag == "variable":
                    variables.append(child.value)
            elif isinstance(child, ast.Invariant):
                invariants.append(child)
            elif isinstance(child, ast.Event):
                events.append(child)
        return ast.Machine(
            name=name,
            refines=refines,
            sees=sees,
            variables=tuple(variables),
            invariants=tuple(invariants),
            events=tuple(events),
            annotations=tuple(annotations),
            layer=layer,
            removed=tuple(removed),
            span=self._span(meta),
        )

    def refines_clause(self, meta, children):
        return _Clause("refines", str(children[0]), self._span(meta))

    def sees_clause(self, meta, children):
        return _Clause("sees", [str(t) for t in children], self._span(meta))

    def layer_item(self, meta, children):
        label = children[0]
        span = self._span(meta)
        if label not in ast.LAYER_LABELS:
            self._error(span, f"unknown keyword '{label}': layer must be one of {', '.join(ast.LAYER_LABELS)}")
        return _Clause("layer", label, span)

    def layer_word(self, meta, children):
        return "".join(str(t) for t in children)

    def removes_item(self, meta, children):
        return _Clause("removes", [str(t) for t in children], self._span(meta))

    def class_item(self, meta, children):
        name, carrier, kind = str(children[0]), str(children[1]), children[2]
        supertype = children[3] if len(children) > 3 else None
        span = self._span(meta)
        if kind not in ast.CLASS_KINDS:
            self._error(span, f"unknown keyword '{kind}': class kind must be one of {', '.join(ast.CLASS_KINDS)}")
        decl = ast.VariableDecl(name, ast.ROLE_CLASS, ast.ClassTyping(carrier), span)
        annotation = ast.ClassAnnotation(name, kind, supertype, span)
        return _Clause("class", (decl, annotation), span)

    def class_kind(self, meta, children):
        return str(children[0])

    def class_extends(self, meta, children):
        return str(children[0])

    def _relation_item(self, role: str, meta, children):
        name, source, arrow, target = (str(c) for c in children[:4])
        kind = ast.ARROWS[arrow]
        if len(children) > 4:
            kind = ast.RelationKind(kind.kind, True)
        span = self._span(meta)
        decl = ast.VariableDecl(name, role, ast.RelationTyping(source, target, kind), span)
        return _Clause("variable", decl, span)

    def attribute_item(self, meta, children):
        return self._relation_item(ast.ROLE_ATTRIBUTE, meta, children)

    def association_item(self, meta, children):
        return self._relation_item(ast.ROLE_ASSOCIATION, meta, children)

    def injective(self, meta, children):
        return True

    def invariant_item(self, meta, children):
        return ast.Invariant(str(children[0])[1:], children[1], self._span(meta))

    # --- events ----------------------------------------------------------

    def event(self, meta, children):
        name = str(children[0])
        fields = {"kind": "normal"}
        for child in children[1:]:
            fields[child.tag] = child.value
        return ast.Event(
            name=name,
            kind=fields["kind"],
            extends=fields.get("extends"),
            refines=fields.get("refines"),
            class_owner=fields.get("owner"),
            parameters=tuple(fields.get("any", ())),
            guards=tuple(fields.get("where", ())),
            actions=tuple(fields.get("then", ())),
            span=self._span(meta),
        )

    def event_kind(self, meta, children):
        return _Clause("kind", str(children[0]))

    def event_owner(self, meta, children):
        return _Clause("owner", str(children[0]))

    def extends_link(self, meta, children):
        return _Clause("extends", str(children[0]))

    def refines_link(self, meta, children):
        return _Clause("refines", str(children[0]))

    def event_any(self, meta, children):
        return _Clause("any", list(children))

    def param(self, meta, children):
        return ast.Parameter(str(children[0]), children[1], self._span(meta))

    def event_where(self, meta, children):
        return _Clause("where", [ast.Guard(label, pred, span) for label, pred, span in children])

    def event_then(self, meta, children):
        return _Clause("then", list(children))

    def action(self, meta, children):
        return ast.Action(str(children[0])[1:], str(children[1]), children[2], self._span(meta))

    # --- predicates ------------------------------------------------------

    def quantified(self, meta, children):
        kind = str(children[0])
        binders = tuple(children[1:-1])
        return ast.Quantifier(kind, binders, children[-1], self._span(meta))

    def binder(self, meta, children):
        return ast.Binder(str(children[0]), children[1], self._span(meta))

    def equiv(self, meta, children):
        return ast.BinaryPred(ast.EQUIV, children[0], children[1], self._span(meta))

    def implication(self, meta, children):
        return ast.BinaryPred(ast.IMPLIES, children[0], children[1], self._span(meta))

    def disjunction(self, meta, children):
        return ast.BinaryPred(ast.OR, children[0], children[1], self._span(meta))

    def conjunction(self, meta, children):
        return ast.BinaryPred(ast.AND, children[0], children[1], self._span(meta))

    def negation(self, meta, children):
        return ast.Not(children[0], self._span(meta))

    def true_pred(self, meta, children):
        return ast.Truth(True, self._span(meta))

    def false_pred(self, meta, children):
        return ast.Truth(False, self._span(meta))

    def relational(self, meta, children):
        return ast.Relational(children[1], children[0], children[2], self._span(meta))

    def membership(self, meta, children):
        return ast.Relational(ast.MEMBER, children[0], children[1], self._span(meta))

    def relop(self, meta, children):
        return str(children[0])

    def fnclass(self, meta, children):
        element, source, arrow, target = children
        return ast.FunctionClass(element, source, target, ast.ARROWS[str(arrow)], self._span(meta))

    # --- expressions -----------------------------------------------------

    def maplet(self, meta, children):
        return ast.Maplet(children[0], children[1], self._span(meta))

    def setop(self, meta, children):
        return ast.BinaryExpr(str(children[1]), children[0], children[2], self._span(meta))

    def inverse(self, meta, children):
        return ast.UnaryExpr(ast.INVERSE, children[0], self._span(meta))

    def image(self, meta, children):
        return ast.Image(children[0], children[1], self._span(meta))

    def apply(self, meta, children):
        return ast.Apply(children[0], children[1], self._span(meta))

    def name(self, meta, children):
        return ast.Name(str(children[0]), self._token_span(children[0]))

    def atom(self, meta, children):
        token = children[0]
        carrier, _, index = str(token).rpartition(".")
        return ast.AtomLit(carrier, int(index), self._token_span(token))

    def empty_set(self, meta, children):
        return ast.SetExt((), self._span(meta))

    def set_ext(self, meta, children):
        return ast.SetExt(tuple(children), self._span(meta))

    def dom(self, meta, children):
        return ast.UnaryExpr(ast.DOM, children[0], self._span(meta))

    def ran(self, meta, children):
        return ast.UnaryExpr(ast.RAN, children[0], self._span(meta))

    def pow(self, meta, children):
        return ast.UnaryExpr(ast.POW, children[0], self._span(meta))
