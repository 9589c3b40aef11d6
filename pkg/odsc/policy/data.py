from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from datetime import UTC, datetime
from enum import Enum
from typing import Iterator, Optional, Union

from ..errors import MalformedDocument, MissingRequired
from .registry import (
    ACTION_LABELS,
    ORDERING_OPERATORS,
    ROLE_LABELS,
    Action,
    Iri,
    LeftOperand,
    Operator,
    PartyRole,
    action_iri,
)

RFC3339_SHAPE = re.compile(r"^\d{4}-\d{2}-\d{2}[Tt ]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})?$")


@dataclass(frozen=True, order=True)
class Timestamp:
    """An instant in whole UTC seconds."""

    seconds: int

    @classmethod
    def parse(cls, text: str) -> "Timestamp":
        if not isinstance(text, str) or not RFC3339_SHAPE.match(text.strip()):
            raise MalformedDocument(f"Not an RFC 3339 timestamp: {text!r}")
        normalized = text.strip()
        if normalized[-1] in "zZ":
            normalized = normalized[:-1] + "+00:00"
        try:
            moment = datetime.fromisoformat(normalized)
        except ValueError as e:
            raise MalformedDocument(f"Not an RFC 3339 timestamp: {text!r} ({e})")
        if moment.tzinfo is None:
            moment = moment.replace(tzinfo=UTC)
        return cls(math.floor(moment.timestamp()))

    def to_text(self) -> str:
        return datetime.fromtimestamp(self.seconds, tz=UTC).strftime("%Y-%m-%dT%H:%M:%SZ")

    def __str__(self):
        return self.to_text()


RightOperand = Union[Timestamp, int, str, tuple]


def describe_operand(value) -> str:
    match value:
        case Timestamp():
            return "timestamp"
        case bool():
            return "boolean"
        case int():
            return "integer"
        case str():
            return "text"
        case tuple():
            return "list"
        case _:
            return type(value).__name__


@dataclass(frozen=True)
class Constraint:
    left_operand: LeftOperand
    operator: Operator
    right_operand: RightOperand
    unit: Optional[str] = None

    def problems(self) -> list[str]:
        """Return every way this constraint breaks the operand/operator/value rules."""
        found = []
        value = self.right_operand
        kind = describe_operand(value)
        match self.left_operand:
            case LeftOperand.DATE_TIME:
                if kind != "timestamp":
                    found.append(f"dateTime needs a timestamp right operand, got {kind}")
            case LeftOperand.PURPOSE:
                if kind == "list":
                    if not all(isinstance(item, str) for item in value):
                        found.append("purpose list must contain only text")
                elif kind != "text":
                    found.append(f"purpose needs text or a list of text, got {kind}")
            case LeftOperand.COUNT:
                if kind != "integer":
                    found.append(f"count needs an integer right operand, got {kind}")
                elif value < 0:
                    found.append("count must be non-negative")
        if self.operator == Operator.IS_ANY_OF and kind != "list":
            found.append("isAnyOf needs a list right operand")
        if self.operator != Operator.IS_ANY_OF and kind == "list":
            found.append(f"{self.operator.value} cannot compare against a list")
        if self.operator in ORDERING_OPERATORS and self.left_operand == LeftOperand.PURPOSE:
            found.append(f"{self.operator.value} only applies to dateTime or count")
        return found


@dataclass(frozen=True)
class ActionTerm:
    term: Action
    iri: Iri

    @classmethod
    def of(cls, action: Action) -> "ActionTerm":
        return cls(action, action_iri(action))

    @property
    def label(self) -> str:
        return ACTION_LABELS[self.term]

    @property
    def is_ods(self) -> bool:
        return self.label.startswith("ods:")


class PartyKind(str, Enum):
    CONCRETE = "Concrete"
    ROLE = "Role"


@dataclass(frozen=True)
class PartyRef:
    kind: PartyKind
    identity: Optional[Iri] = None
    role: Optional[PartyRole] = None

    def __post_init__(self):
        if self.kind == PartyKind.CONCRETE and (self.identity is None or self.role is not None):
            raise ValueError("A concrete party carries an identity and no role")
        if self.kind == PartyKind.ROLE and (self.role is None or self.identity is not None):
            raise ValueError("A role party carries a role and no identity")

    @classmethod
    def concrete(cls, identity: Iri | str) -> "PartyRef":
        return cls(PartyKind.CONCRETE, identity=identity if isinstance(identity, Iri) else Iri(identity))

    @classmethod
    def of_role(cls, role: PartyRole) -> "PartyRef":
        return cls(PartyKind.ROLE, role=role)

    @property
    def is_role(self) -> bool:
        return self.kind == PartyKind.ROLE

    def to_text(self) -> str:
        return ROLE_LABELS[self.role] if self.is_role else self.identity.value


@dataclass(frozen=True)
class Rule:
    action: ActionTerm
    target: Iri
    assigner: Optional[PartyRef] = None
    assignee: Optional[PartyRef] = None
    constraints: tuple[Constraint, ...] = ()
    duties: tuple["Rule", ...] = ()


class PolicyKind(str, Enum):
    SET = "Set"
    OFFER = "Offer"
    AGREEMENT = "Agreement"


class RuleKind(str, Enum):
    PERMISSION = "permission"
    PROHIBITION = "prohibition"
    OBLIGATION = "obligation"


@dataclass(frozen=True)
class OdrlPolicy:
    uid: Iri
    policy_kind: PolicyKind = PolicyKind.SET
    profile: tuple[Iri, ...] = ()
    permissions: tuple[Rule, ...] = ()
    prohibitions: tuple[Rule, ...] = ()
    obligations: tuple[Rule, ...] = ()
    assigner: Optional[PartyRef] = None
    assignee: Optional[PartyRef] = None
    # Paths of keys the parser did not understand; reported, never re-emitted
    unknown_keys: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not (self.permissions or self.prohibitions or self.obligations):
            raise MissingRequired("A policy needs at least one rule", "/")

    def rules(self) -> Iterator[tuple[str, RuleKind, Rule]]:
        """Yield (path, kind, rule) for every top-level rule."""
        for kind, rules in (
            (RuleKind.PERMISSION, self.permissions),
            (RuleKind.PROHIBITION, self.prohibitions),
            (RuleKind.OBLIGATION, self.obligations),
        ):
            for index, rule in enumerate(rules):
                yield f"/{kind.value}/{index}", kind, rule

    def all_rules(self) -> Iterator[tuple[str, RuleKind, Rule]]:
        """Like rules(), plus every duty (reported with RuleKind.OBLIGATION)."""
        for path, kind, rule in self.rules():
            yield path, kind, rule
            for index, duty in enumerate(rule.duties):
                yield f"{path}/duty/{index}", RuleKind.OBLIGATION, duty

    def effective_assigner(self, rule: Rule) -> Optional[PartyRef]:
        return rule.assigner or self.assigner

    def effective_assignee(self, rule: Rule) -> Optional[PartyRef]:
        return rule.assignee or self.assignee

    def uses_ods_terms(self) -> bool:
        parties = [self.assigner, self.assignee]
        for _, _, rule in self.all_rules():
            if rule.action.is_ods:
                return True
            parties.extend((rule.assigner, rule.assignee))
        return any(party is not None and party.is_role for party in parties)
