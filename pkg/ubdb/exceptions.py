"""
Custom Exceptions for ubdb

Copyright (C) 2025 Dynamic Devices Ltd
License: GPL-3.0-or-later
"""

from typing import Any, List, Optional


class UbdbError(Exception):
    """Base exception for all ubdb errors"""

    def __init__(
        self,
        message: str,
        error_code: Optional[str] = None,
        details: Optional[dict] = None,
        suggestions: Optional[list] = None,
        fixes: Optional[list] = None,
        related_commands: Optional[list] = None,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        self.suggestions = suggestions or []
        self.fixes = fixes or []
        self.related_commands = related_commands or []

    def to_dict(self) -> dict:
        """Convert exception to dictionary for JSON serialization with helpful context"""
        result = {"error": self.message, "error_code": self.error_code, "details": self.details}

        if self.suggestions:
            result["suggestions"] = self.suggestions
        if self.fixes:
            result["fixes"] = self.fixes
        if self.related_commands:
            result["related_commands"] = self.related_commands

        return result


class ConfigurationError(UbdbError):
    """Configuration-related errors"""


class UsageError(UbdbError):
    """Invalid command-line usage"""


# --- model-core -----------------------------------------------------------


class ModelError(UbdbError):
    """Errors found while resolving a refinement chain"""

    def __init__(self, message: str, component: Optional[str] = None, span: Any = None, **kwargs):
        super().__init__(message, **kwargs)
        self.component = component
        self.span = span
        if component:
            self.details["component"] = component
        if span is not None:
            self.details["span"] = str(span)


class UnresolvedNameError(ModelError):
    """Identifier with no declaration in scope"""

    def __init__(self, message: str, name: Optional[str] = None, **kwargs):
        kwargs.setdefault(
            "suggestions",
            [
                f"'{name}' is not declared by this machine, an abstraction or a seen context",
                "Identifiers are case-sensitive",
            ],
        )
        kwargs.setdefault("fixes", ["Declare the name or add the context to 'sees'"])
        kwargs.setdefault("related_commands", ["fmt", "lint"])
        super().__init__(message, error_code="UNRESOLVED_NAME", **kwargs)
        self.name = name
        if name:
            self.details["name"] = name


class DuplicateNameError(ModelError):
    """Name declared twice within one refinement chain"""

    def __init__(self, message: str, name: Optional[str] = None, **kwargs):
        kwargs.setdefault(
            "suggestions",
            ["Carrier sets, constants, variables and component names share one namespace"],
        )
        super().__init__(message, error_code="DUPLICATE_NAME", **kwargs)
        self.name = name
        if name:
            self.details["name"] = name


class CyclicRefinementError(ModelError):
    """refines/extends edges form a cycle"""

    def __init__(self, message: str, cycle: Optional[List[str]] = None, **kwargs):
        super().__init__(message, error_code="CYCLIC_REFINEMENT", **kwargs)
        self.cycle = cycle or []
        if cycle:
            self.details["cycle"] = list(cycle)


class RefinementOrderError(ModelError):
    """A machine does not refine its immediate predecessor"""

    def __init__(self, message: str, **kwargs):
        kwargs.setdefault(
            "fixes", ["Order machines so each one refines the machine written just before it"]
        )
        super().__init__(message, error_code="REFINEMENT_ORDER", **kwargs)


class ExtendMismatchError(ModelError):
    """Event extends/refines a non-existent abstract event"""

    def __init__(self, message: str, event: Optional[str] = None, **kwargs):
        kwargs.setdefault(
            "suggestions",
            ["'extends' and 'refines' must name an event of the machine being refined"],
        )
        super().__init__(message, error_code="EXTEND_MISMATCH", **kwargs)
        self.event = event
        if event:
            self.details["event"] = event


# --- parser ---------------------------------------------------------------


class ParseError(UbdbError):
    """Source text could not be parsed; carries the diagnostics"""

    def __init__(self, message: str, diagnostics: Optional[list] = None, **kwargs):
        kwargs.setdefault("related_commands", ["fmt"])
        super().__init__(message, error_code="PARSE_ERROR", **kwargs)
        self.diagnostics = list(diagnostics or [])
        if self.diagnostics:
            self.details["diagnostics"] = [str(d) for d in self.diagnostics]


# --- set-engine -----------------------------------------------------------


class EvaluationError(UbdbError):
    """Expression could not be evaluated"""


class FunctionApplicationError(EvaluationError):
    """f(x) applied with x outside dom(f), or f not functional at x (well-definedness)"""

    def __init__(self, message: str, function: Optional[str] = None, argument: Any = None, **kwargs):
        super().__init__(message, error_code="FUNCTION_APPLICATION_OUTSIDE_DOMAIN", **kwargs)
        self.function = function
        self.argument = argument
        if function:
            self.details["function"] = function
        if argument is not None:
            self.details["argument"] = str(argument)


class UnboundNameError(EvaluationError):
    """Free identifier with no value in state, binding or context"""

    def __init__(self, message: str, name: Optional[str] = None, **kwargs):
        super().__init__(message, error_code="UNBOUND_NAME", **kwargs)
        self.name = name


class ConflictingAssignmentError(EvaluationError):
    """Two actions of one event assign the same variable"""

    def __init__(self, message: str, event: Optional[str] = None, variable: Optional[str] = None, **kwargs):
        super().__init__(message, error_code="CONFLICTING_ASSIGNMENT", **kwargs)
        self.event = event
        self.variable = variable
        if event:
            self.details["event"] = event
        if variable:
            self.details["variable"] = variable


class ScopeExhaustedError(EvaluationError):
    """A constructor has no fresh atom left within the scope"""

    def __init__(self, message: str, event: Optional[str] = None, carrier: Optional[str] = None, **kwargs):
        kwargs.setdefault("suggestions", [f"Raise the bound with --scope {carrier or 'SET'}=N"])
        super().__init__(message, error_code="SCOPE_EXHAUSTED", **kwargs)
        self.event = event
        self.carrier = carrier


# --- po-checker -----------------------------------------------------------


class CheckerError(UbdbError):
    """Errors raised by the obligation checker"""


class StateBudgetExceededError(CheckerError):
    """Exploration reached the state budget before finishing"""

    def __init__(self, message: str, budget: int = 0, **kwargs):
        kwargs.setdefault("suggestions", ["Increase --budget or lower --scope bounds"])
        super().__init__(message, error_code="STATE_BUDGET_EXCEEDED", **kwargs)
        self.budget = budget
        self.details["budget"] = budget


class TraceReplayError(CheckerError):
    """A counterexample or trace file does not replay through the set engine"""

    def __init__(self, message: str, step: Optional[int] = None, **kwargs):
        kwargs.setdefault("related_commands", ["animate"])
        super().__init__(message, error_code="TRACE_REPLAY", **kwargs)
        self.step = step
        if step is not None:
            self.details["step"] = step


# --- patterns -------------------------------------------------------------


class PatternError(UbdbError):
    """Errors raised by model transformations"""


class NotARelationError(PatternError):
    """split_association target is not a many-to-many relation"""

    def __init__(self, message: str, relation: Optional[str] = None, **kwargs):
        kwargs.setdefault(
            "suggestions", ["Only associations declared with '<->' can be split"]
        )
        super().__init__(message, error_code="NOT_A_RELATION", **kwargs)
        self.relation = relation
        if relation:
            self.details["relation"] = relation


class NameClashError(PatternError):
    """A name requested for a generated element is already used"""

    def __init__(self, message: str, name: Optional[str] = None, **kwargs):
        super().__init__(message, error_code="NAME_CLASH", **kwargs)
        self.name = name
        if name:
            self.details["name"] = name


class UnsupportedRewriteError(PatternError):
    """An event uses a relation in a form the splitter cannot rewrite"""

    def __init__(self, message: str, event: Optional[str] = None, **kwargs):
        super().__init__(message, error_code="UNSUPPORTED_REWRITE", **kwargs)
        self.event = event
        if event:
            self.details["event"] = event


# --- sqlgen ---------------------------------------------------------------


class SqlGenError(UbdbError):
    """Errors raised while generating SQL"""


class UnannotatedClassError(SqlGenError):
    """Class-instance-set variable without a kind annotation"""

    def __init__(self, message: str, class_name: Optional[str] = None, **kwargs):
        kwargs.setdefault("fixes", ["Declare the variable with 'class NAME : SET kind KIND'"])
        super().__init__(message, error_code="UNANNOTATED_CLASS", **kwargs)
        self.class_name = class_name
        if class_name:
            self.details["class"] = class_name


class UnsupportedGuardError(SqlGenError):
    """Guard outside the translatable fragment"""

    def __init__(self, message: str, event: Optional[str] = None, label: Optional[str] = None, **kwargs):
        kwargs.setdefault(
            "suggestions",
            [
                "Translatable guards: membership, equality, function application, "
                "quantification that becomes EXISTS"
            ],
        )
        super().__init__(message, error_code="UNSUPPORTED_GUARD", **kwargs)
        self.event = event
        self.label = label
        if event:
            self.details["event"] = event
        if label:
            self.details["label"] = label


class UnsupportedActionError(SqlGenError):
    """Action outside the translatable fragment"""

    def __init__(self, message: str, event: Optional[str] = None, label: Optional[str] = None, **kwargs):
        super().__init__(message, error_code="UNSUPPORTED_ACTION", **kwargs)
        self.event = event
        self.label = label
        if event:
            self.details["event"] = event
        if label:
            self.details["label"] = label


class EmitError(SqlGenError):
    """Writing the script or manifest failed"""


class ProcedureError(UbdbError):
    """Runtime failure while executing a generated procedure"""

    def __init__(self, message: str, procedure: Optional[str] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.procedure = procedure
        if procedure:
            self.details["procedure"] = procedure


class GuardRejectedError(ProcedureError):
    """A procedure guard evaluated to false; nothing was modified"""

    def __init__(self, message: str, procedure: Optional[str] = None, label: Optional[str] = None, **kwargs):
        super().__init__(message, procedure=procedure, error_code="GUARD_REJECTED", **kwargs)
        self.label = label
        if label:
            self.details["label"] = label


class ProcedureFailedError(ProcedureError):
    """The engine raised while modifying data; the transaction was rolled back"""

    def __init__(self, message: str, procedure: Optional[str] = None, **kwargs):
        super().__init__(message, procedure=procedure, error_code="PROCEDURE_FAILED", **kwargs)
