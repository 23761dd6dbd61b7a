"""
Semantic model of refinement chains: contexts, machines, class annotations,
events and the set-theoretic expression language.

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from ubdb.model.ast import (
    Action,
    AtomLit,
    Axiom,
    BinaryExpr,
    BinaryPred,
    Binder,
    ClassAnnotation,
    ClassTyping,
    Constant,
    Context,
    Event,
    FunctionClass,
    Guard,
    Image,
    Invariant,
    Apply,
    Machine,
    Maplet,
    Name,
    Not,
    Parameter,
    Quantifier,
    RefinementChain,
    Relational,
    RelationKind,
    RelationTyping,
    SetExt,
    Truth,
    UnaryExpr,
    VariableDecl,
)
from ubdb.model.chain import ResolvedChain, ResolvedEvent, ResolvedMachine
from ubdb.model.resolve import resolve
from ubdb.model.typecheck import TypeDiagnostic, has_errors, typecheck
from ubdb.model.types import AnyType, AtomType, PairType, PowType, SetType

__all__ = [
    "Action",
    "AnyType",
    "Apply",
    "AtomLit",
    "AtomType",
    "Axiom",
    "BinaryExpr",
    "BinaryPred",
    "Binder",
    "ClassAnnotation",
    "ClassTyping",
    "Constant",
    "Context",
    "Event",
    "FunctionClass",
    "Guard",
    "Image",
    "Invariant",
    "Machine",
    "Maplet",
    "Name",
    "Not",
    "PairType",
    "Parameter",
    "PowType",
    "Quantifier",
    "RefinementChain",
    "Relational",
    "RelationKind",
    "RelationTyping",
    "ResolvedChain",
    "ResolvedEvent",
    "ResolvedMachine",
    "SetExt",
    "SetType",
    "Truth",
    "TypeDiagnostic",
    "UnaryExpr",
    "VariableDecl",
    "has_errors",
    "resolve",
    "typecheck",
]
