"""
Lark grammar for the .ubdb modelling language

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from lark import Lark

GRAMMAR = r"""
    start:          component*
    ?component:     context | machine

    // contexts
    context:        "context" NAME ctx_extends? ctx_section* "end"
    ctx_extends:    "extends" NAME
    ?ctx_section:   sets_section | constants_section | axioms_section
    sets_section:   "sets" NAME+
    constants_section: "constants" constant_def+
    constant_def:   NAME "=" expr
    axioms_section: "axioms" labelled_pred+
    labelled_pred:  LABEL pred

    // machines
    machine:        "machine" NAME refines_clause? sees_clause? _machine_item* "end"
    refines_clause: "refines" NAME
    sees_clause:    "sees" NAME ("," NAME)*
    _machine_item:  layer_item | removes_item | class_item | attribute_item
                  | association_item | invariant_item | event
    layer_item:     "layer" layer_word
    !layer_word:    (NAME | "attribute") ("-" (NAME | "attribute"))*
    removes_item:   "removes" NAME ("," NAME)*
    class_item:     "class" NAME ":" NAME "kind" class_kind class_extends?
    !class_kind:    NAME | "attribute"
    class_extends:  "extends" NAME
    attribute_item: "attribute" NAME ":" NAME ARROW NAME injective?
    association_item: "association" NAME ":" NAME ARROW NAME injective?
    injective:      "injective"
    invariant_item: "invariant" LABEL pred

    // events
    event:          "event" NAME event_kind? event_owner? event_link? event_any? event_where? event_then? "end"
    !event_kind:    "constructor" | "destructor" | "query"
    event_owner:    "of" NAME
    ?event_link:    extends_link | refines_link
    extends_link:   "extends" NAME
    refines_link:   "refines" NAME
    event_any:      "any" param ("," param)*
    param:          NAME ":" expr
    event_where:    "where" labelled_pred+
    event_then:     "then" action+
    action:         LABEL NAME ":=" expr

    // predicates
    ?pred:          quantified | equiv
    quantified:     QUANT binder ("," binder)* "." pred
    binder:         NAME ":" expr
    ?equiv:         implication | equiv "<=>" implication
    ?implication:   disjunction | disjunction "=>" implication
    ?disjunction:   conjunction | disjunction "or" conjunction
    ?conjunction:   negation | conjunction "&" negation
    ?negation:      atom_pred | "not" negation -> negation
    ?atom_pred:     "(" pred ")"
                  | "true"                      -> true_pred
                  | "false"                     -> false_pred
                  | expr relop expr             -> relational
                  | expr ":" expr               -> membership
                  | expr ":" expr ARROW expr    -> fnclass
    !relop:         "/:" | "<:" | "=" | "/="

    // expressions
    ?expr:          maplet
    ?maplet:        setop | maplet "|->" setop
    ?setop:         postfix | setop SETOP postfix
    ?postfix:       primary
                  | postfix "~"                 -> inverse
                  | postfix "[" expr "]"        -> image
                  | postfix "(" expr ")"        -> apply
    ?primary:       NAME                        -> name
                  | ATOM                        -> atom
                  | "{" "}"                     -> empty_set
                  | "{" expr ("," expr)* "}"    -> set_ext
                  | "(" expr ")"
                  | "dom" "(" expr ")"          -> dom
                  | "ran" "(" expr ")"          -> ran
                  | "POW" "(" expr ")"          -> pow

    ARROW:          "-->" | "+->" | "<->" | ">->" | ">+>"
    SETOP:          "\\/" | "/\\" | "**" | "<-|" | "<|" | "<+" | ";" | "\\"
    QUANT:          "!" | "#"
    ATOM.2:         /[A-Za-z_][A-Za-z0-9_]*\.[0-9]+/
    NAME:           /[A-Za-z_][A-Za-z0-9_]*/
    LABEL:          /@[A-Za-z_][A-Za-z0-9_]*/
    COMMENT:        /\/\/[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

# Every literal keyword of the grammar; identifiers may not use them
KEYWORDS = frozenset(
    {
        "context",
        "sets",
        "constants",
        "axioms",
        "machine",
        "refines",
        "sees",
        "class",
        "kind",
        "attribute",
        "association",
        "invariant",
        "event",
        "constructor",
        "destructor",
        "query",
        "extends",
        "any",
        "where",
        "then",
        "end",
        "layer",
        "removes",
        "of",
        "injective",
        "not",
        "or",
        "true",
        "false",
        "dom",
        "ran",
        "POW",
    }
)

PARSER = Lark(
    GRAMMAR,
    parser="lalr",
    lexer="basic",
    start=["start", "expr", "pred"],
    propagate_positions=True,
    maybe_placeholders=False,
)
