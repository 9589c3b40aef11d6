"""Native evaluation of compiled conditions against tuple and request context."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from ..errors import MalformedDocument, TypeMismatch
from ..policy.data import Constraint, Timestamp
from ..policy.registry import Operator
from ..rebac.model import ConditionDef, ParamType, parameter_for


@dataclass(frozen=True)
class MissingParameter:
    """Evaluation outcome when the predicate names parameters nobody supplied."""

    names: tuple[str, ...]


def coerce(value: Any, param_type: ParamType, name: str = "") -> Any:
    """
    Convert a context value to its parameter type.

    Timestamps accept a Timestamp, whole UTC seconds or RFC 3339 text.

    Raises:
        TypeMismatch: If the value cannot be read as `param_type`.
    """
    label = f"'{name}'" if name else "value"
    match param_type:
        case ParamType.TIMESTAMP:
            if isinstance(value, Timestamp):
                return value
            if isinstance(value, int) and not isinstance(value, bool):
                return Timestamp(value)
            if isinstance(value, str):
                try:
                    return Timestamp.parse(value)
                except MalformedDocument:
                    pass
        case ParamType.TEXT:
            if isinstance(value, str):
                return value
        case ParamType.INTEGER:
            if isinstance(value, int) and not isinstance(value, bool):
                return value
        case ParamType.TEXT_LIST:
            if isinstance(value, (list, tuple)) and all(isinstance(item, str) for item in value):
                return tuple(value)
    raise TypeMismatch(f"Context {label} is not a {param_type.value}: {value!r}")


def compare(value: Any, operator: Operator, bound: Any) -> bool:
    match operator:
        case Operator.EQ:
            return value == bound
        case Operator.LT:
            return value < bound
        case Operator.LTEQ:
            return value <= bound
        case Operator.GT:
            return value > bound
        case Operator.GTEQ:
            return value >= bound
        case Operator.IS_ANY_OF:
            if isinstance(value, tuple):
                return any(item in bound for item in value)
            return value in bound
    raise ValueError(f"Unsupported operator {operator}")


def _bound(constraint: Constraint, param_type: ParamType) -> Any:
    if constraint.operator == Operator.IS_ANY_OF:
        return tuple(constraint.right_operand)
    if param_type == ParamType.TEXT_LIST:
        return constraint.right_operand
    return coerce(constraint.right_operand, param_type)


def evaluate_condition(
    condition: ConditionDef,
    tuple_context: Mapping[str, Any] | None,
    request_context: Mapping[str, Any] | None,
) -> bool | MissingParameter:
    """
    Evaluate a condition's predicate.

    The request context wins over the tuple context on key collisions.

    Returns:
        True or False, or MissingParameter naming every predicate parameter
        neither context supplies.

    Raises:
        TypeMismatch: If a supplied value does not match its parameter type.
    """
    merged = {**(tuple_context or {}), **(request_context or {})}
    missing = []
    for constraint in condition.predicate:
        variable, _ = parameter_for(constraint)
        if variable not in merged and variable not in missing:
            missing.append(variable)
    if missing:
        return MissingParameter(tuple(sorted(missing)))

    for constraint in condition.predicate:
        variable, default_type = parameter_for(constraint)
        param_type = condition.parameters.get(variable, default_type)
        value = coerce(merged[variable], param_type, variable)
        if not compare(value, constraint.operator, _bound(constraint, param_type)):
            return False
    return True
