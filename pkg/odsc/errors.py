"""Exception hierarchy shared by the parser, compiler, store and check engine."""

from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from .policy.validation import Diagnostic


class OdsError(Exception):
    """Base class for every error raised by odsc."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class MalformedDocument(OdsError, ValueError):
    """The input is not parseable as the expected document format."""


class UnknownTerm(OdsError, ValueError):
    """A term resolves to no registry entry.

    Attributes:
        term: The offending text.
        kind: What was being resolved ('action', 'party', 'leftOperand', 'operator').
        path: Slash-separated location inside the policy, empty when unknown.
    """

    def __init__(self, term: str, kind: str = "term", path: str = ""):
        super().__init__(f"Unknown {kind} '{term}'" + (f" at {path}" if path else ""))
        self.term = term
        self.kind = kind
        self.path = path


class MissingRequired(OdsError, ValueError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path


class InvalidModel(OdsError):
    """An authorization model violates its invariants."""

    def __init__(self, message: str, diagnostics: Sequence["Diagnostic"] = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class ValidationFailed(OdsError):
    """Compilation refused because validation produced Error diagnostics."""

    def __init__(self, diagnostics: Sequence["Diagnostic"]):
        codes = ", ".join(sorted({d.code for d in diagnostics}))
        super().__init__(f"Policy failed validation ({codes})")
        self.diagnostics = list(diagnostics)


class UnsupportedConstruct(OdsError):
    """A policy construct has no lowering rule."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{message} at {path}" if path else message)
        self.path = path


class MergeConflict(OdsError):
    def __init__(self, type_name: str, relation: str):
        super().__init__(f"Conflicting definitions for relation '{type_name}#{relation}'")
        self.type_name = type_name
        self.relation = relation


class IdCollision(UnsupportedConstruct):
    def __init__(self, object_id: str, first: str, second: str):
        super().__init__(f"Id '{object_id}' derived from both '{first}' and '{second}'")
        self.object_id = object_id
        self.iris = (first, second)


class DuplicateAdd(OdsError):
    pass


class AbsentDelete(OdsError):
    pass


class UnknownTypeOrRelation(OdsError):
    pass


class ModelNotFound(OdsError):
    pass


class StoreNotFound(OdsError):
    pass


class StoreBusy(OdsError):
    pass


class TypeMismatch(OdsError):
    """A context value does not match its declared parameter type."""


class MalformedContext(OdsError):
    pass
