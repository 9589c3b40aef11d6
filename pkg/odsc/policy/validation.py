"""ODS profile conformance rules, reported as machine-readable diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from ..errors import UnknownTerm
from ..utils.logging import get_logger
from .data import LeftOperand, OdrlPolicy, PolicyKind, RuleKind
from .parser import parse_policy
from .registry import ODS_PROFILE, Action, PartyRole

logger = get_logger(__name__)


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


CATALOGUE = {
    "ODS001": (Severity.ERROR, "Agreement rule must resolve both an assigner and an assignee"),
    "ODS002": (Severity.ERROR, "Term is not part of the ODRL subset or the ODS profile"),
    "ODS003": (Severity.ERROR, "Constraint operand, operator and value do not match"),
    "ODS004": (Severity.ERROR, "Only permissions may carry duties"),
    "ODS005": (Severity.ERROR, "Agreement assigner must be a concrete party, not a role"),
    "ODS101": (Severity.WARNING, "Policy uses ODS terms without declaring the ODS profile"),
    "ODS102": (Severity.WARNING, "Retention has no dateTime or count constraint"),
    "ODS103": (Severity.WARNING, "Monitor party attached to a permission"),
    "ODS104": (Severity.WARNING, "Unknown key ignored"),
}

# Model-level catalogue, used by odsc.rebac.validation
MODEL_CATALOGUE = {
    "FGA001": "Duplicate type definition",
    "FGA002": "Rewrite references a relation that does not exist",
    "FGA003": "Directly related user type references an undefined condition",
    "FGA004": "Directly related user types must be declared iff the rewrite has a direct leaf",
    "FGA005": "Type, relation and condition names must be lowercase identifiers",
    "FGA006": "Union and intersection need at least two children",
    "FGA007": "Rewrite tree is deeper than the allowed maximum",
    "FGA008": "Unsupported schema version",
    "FGA009": "Condition predicate uses an undeclared parameter",
    "FGA010": "Directly related user type names an unknown type or relation",
}


@dataclass(frozen=True, order=True)
class Diagnostic:
    path: str
    code: str
    severity: Severity
    message: str

    @classmethod
    def make(cls, code: str, path: str, detail: Optional[str] = None) -> "Diagnostic":
        if code in CATALOGUE:
            severity, summary = CATALOGUE[code]
        else:
            severity, summary = Severity.ERROR, MODEL_CATALOGUE[code]
        return cls(path=path, code=code, severity=severity, message=f"{summary}: {detail}" if detail else summary)

    @property
    def is_error(self) -> bool:
        return self.severity == Severity.ERROR

    def render(self) -> str:
        # an empty path is the document root
        location = f" {self.path}" if self.path else ""
        return f"{self.severity.value.upper()} {self.code}{location}: {self.message}"

    def to_record(self) -> dict:
        return {"severity": self.severity.value, "code": self.code, "message": self.message, "path": self.path}


def sort_diagnostics(diagnostics: Iterable[Diagnostic]) -> list[Diagnostic]:
    return sorted(set(diagnostics), key=lambda d: (d.path, d.code, d.message))


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


def render_diagnostics(diagnostics: Iterable[Diagnostic]) -> str:
    return "".join(f"{d.render()}\n" for d in sort_diagnostics(diagnostics))


def validate(policy: OdrlPolicy) -> list[Diagnostic]:
    """
    Check a parsed policy against the ODS profile rules.

    Returns:
        Every diagnostic, ordered by path then code. An empty list means the
        policy conforms; any Error severity means compilation must refuse it.
    """
    found: list[Diagnostic] = []
    agreement = policy.policy_kind == PolicyKind.AGREEMENT

    if agreement and policy.assigner is not None and policy.assigner.is_role:
        found.append(Diagnostic.make("ODS005", "/assigner", policy.assigner.to_text()))

    for path, kind, rule in policy.rules():
        assigner = policy.effective_assigner(rule)
        assignee = policy.effective_assignee(rule)
        if agreement:
            if assigner is None:
                found.append(Diagnostic.make("ODS001", f"{path}/assigner", "assigner missing"))
            elif rule.assigner is not None and rule.assigner.is_role:
                found.append(Diagnostic.make("ODS005", f"{path}/assigner", rule.assigner.to_text()))
            if assignee is None:
                found.append(Diagnostic.make("ODS001", f"{path}/assignee", "assignee missing"))
        if rule.duties and kind != RuleKind.PERMISSION:
            found.append(Diagnostic.make("ODS004", f"{path}/duty", f"{len(rule.duties)} duty rule(s) on a {kind.value}"))
        if kind == RuleKind.PERMISSION:
            for field_name, own, party in (
                ("assigner", rule.assigner, assigner),
                ("assignee", rule.assignee, assignee),
            ):
                if party is not None and party.is_role and party.role == PartyRole.MONITOR:
                    # inherited parties are reported once, where the policy declares them
                    where = f"{path}/{field_name}" if own is not None else f"/{field_name}"
                    found.append(Diagnostic.make("ODS103", where))

    for path, kind, rule in policy.all_rules():
        for index, constraint in enumerate(rule.constraints):
            for problem in constraint.problems():
                found.append(Diagnostic.make("ODS003", f"{path}/constraint/{index}", problem))
        if rule.action.term == Action.RETENTION:
            bounded = any(
                c.left_operand in (LeftOperand.DATE_TIME, LeftOperand.COUNT) for c in rule.constraints
            )
            if not bounded:
                found.append(Diagnostic.make("ODS102", path))
        for index, duty in enumerate(rule.duties if kind != RuleKind.OBLIGATION else ()):
            if duty.duties:
                found.append(Diagnostic.make("ODS004", f"{path}/duty/{index}/duty", "nested duties"))

    if policy.uses_ods_terms() and ODS_PROFILE not in policy.profile:
        found.append(Diagnostic.make("ODS101", "/profile" if policy.profile else "", f"expected {ODS_PROFILE.value}"))

    for key_path in policy.unknown_keys:
        found.append(Diagnostic.make("ODS104", key_path))

    diagnostics = sort_diagnostics(found)
    if diagnostics:
        logger.debug(f"Validated {policy.uid}: {len(diagnostics)} diagnostic(s)")
    return diagnostics


def analyze_document(document: bytes | str) -> tuple[Optional[OdrlPolicy], list[Diagnostic]]:
    """
    Parse and validate in one step.

    Unknown action or party terms become ODS002 errors and unknown operands or
    operators become ODS003 errors at the offending path, so they show up in
    the same listing as the profile rules.

    Raises:
        MalformedDocument: If the document cannot be read at all.
        MissingRequired: If required policy parts are missing.
    """
    try:
        policy = parse_policy(document)
    except UnknownTerm as e:
        code = "ODS002" if e.kind in ("action", "party") else "ODS003"
        return None, [Diagnostic.make(code, e.path or "/", f"unknown {e.kind} '{e.term}'")]
    return policy, validate(policy)
