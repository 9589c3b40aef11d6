"""Duty and obligation rules become records for a usage-control runtime to act on."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional

from ..errors import UnsupportedConstruct
from ..policy.data import ActionTerm, Constraint, Rule, Timestamp
from ..policy.registry import Action, Iri, LeftOperand, Operator
from ..utils import derive_id

UNIT_SECONDS = {
    "s": 1, "sec": 1, "second": 1, "seconds": 1,
    "min": 60, "minute": 60, "minutes": 60,
    "h": 3600, "hour": 3600, "hours": 3600,
    "d": 86400, "day": 86400, "days": 86400,
    "week": 604800, "weeks": 604800,
}

# Operators that bound a retention period from above
_UPPER_BOUNDS = (Operator.EQ, Operator.LTEQ, Operator.LT)


@dataclass(frozen=True)
class ObligationRecord:
    action: ActionTerm
    target: Iri
    parameters: Mapping[str, Any]
    source_rule_path: str
    policy_uid: Optional[Iri] = field(default=None)

    def sort_key(self) -> tuple[str, str]:
        return (self.policy_uid.value if self.policy_uid else "", self.source_rule_path)

    def to_record(self) -> dict:
        record = {
            "action": self.action.label,
            "target": self.target.value,
            "parameters": {key: _render(value) for key, value in sorted(self.parameters.items())},
            "source_rule_path": self.source_rule_path,
        }
        if self.policy_uid is not None:
            record["policy_uid"] = self.policy_uid.value
        return record


def _render(value: Any) -> Any:
    match value:
        case Timestamp():
            return value.to_text()
        case tuple():
            return [_render(item) for item in value]
        case _:
            return value


def unit_factor(unit: Optional[str], path: str = "") -> int:
    if unit is None:
        return 1
    key = derive_id(unit) or unit.strip().lower()
    if key not in UNIT_SECONDS:
        raise UnsupportedConstruct(f"Unknown duration unit '{unit}'", path)
    return UNIT_SECONDS[key]


def _retention_parameter(constraint: Constraint, path: str) -> Optional[tuple[str, Any]]:
    if constraint.operator not in _UPPER_BOUNDS:
        return None
    strict = constraint.operator == Operator.LT
    match constraint.left_operand:
        case LeftOperand.DATE_TIME:
            deadline = constraint.right_operand.seconds - (1 if strict else 0)
            return "retention_deadline", Timestamp(deadline)
        case LeftOperand.COUNT:
            seconds = constraint.right_operand * unit_factor(constraint.unit, path)
            return "retention_seconds", seconds - (1 if strict else 0)
        case LeftOperand.PURPOSE:
            return "purpose", constraint.right_operand
    return None


def obligation_parameters(rule: Rule, path: str) -> dict[str, Any]:
    """
    Derive record parameters from a duty's constraints.

    Retention keeps a deadline, a period in seconds or a purpose; any other
    constraint is kept as `<leftOperand>_<operator>`.
    """
    parameters: dict[str, Any] = {}
    for index, constraint in enumerate(rule.constraints):
        named = None
        if rule.action.term == Action.RETENTION:
            named = _retention_parameter(constraint, f"{path}/constraint/{index}")
        if named is None:
            named = (f"{constraint.left_operand.value}_{constraint.operator.value}", constraint.right_operand)
        key, value = named
        parameters[key] = value
    return parameters


def obligation_record(rule: Rule, path: str, policy_uid: Optional[Iri] = None) -> ObligationRecord:
    return ObligationRecord(
        action=rule.action,
        target=rule.target,
        parameters=obligation_parameters(rule, path),
        source_rule_path=path,
        policy_uid=policy_uid,
    )


def render_obligations(records: Iterable[ObligationRecord]) -> bytes:
    """One JSON record per line, in policy then rule-path order."""
    ordered = sorted(records, key=ObligationRecord.sort_key)
    return "".join(json.dumps(r.to_record(), ensure_ascii=False) + "\n" for r in ordered).encode("utf-8")
