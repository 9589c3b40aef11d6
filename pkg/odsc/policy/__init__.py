from .data import (
    ActionTerm,
    Constraint,
    OdrlPolicy,
    PartyKind,
    PartyRef,
    PolicyKind,
    Rule,
    RuleKind,
    Timestamp,
)
from .parser import parse_policy, serialize_policy
from .registry import (
    ODS_NAMESPACE,
    ODS_PROFILE,
    ODRL_NAMESPACE,
    REGISTRY,
    Action,
    Iri,
    LeftOperand,
    Operator,
    ParentClass,
    PartyRole,
    TermRegistryEntry,
    resolve_term,
)
from .validation import Diagnostic, Severity, analyze_document, render_diagnostics, validate
