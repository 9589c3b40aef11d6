"""Authorization model types: userset rewrite trees, conditions, object and tuple references."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Mapping, Optional

from ..errors import MalformedDocument
from ..policy.data import Constraint
from ..policy.registry import LeftOperand
from ..utils.version import SCHEMA_VERSION

MAX_TREE_DEPTH = 10


# --- Rewrite trees ---

@dataclass(frozen=True)
class Direct:
    pass


@dataclass(frozen=True)
class ComputedUserset:
    relation: str


@dataclass(frozen=True)
class TupleToUserset:
    tupleset_relation: str
    computed_relation: str


@dataclass(frozen=True)
class Union:
    children: tuple

    @staticmethod
    def of(*nodes) -> "Union":
        return Union(children=tuple(nodes))


@dataclass(frozen=True)
class Intersection:
    children: tuple

    @staticmethod
    def of(*nodes) -> "Intersection":
        return Intersection(children=tuple(nodes))


@dataclass(frozen=True)
class Exclusion:
    base: Any
    subtract: Any


RewriteTree = Direct | ComputedUserset | TupleToUserset | Union | Intersection | Exclusion


def iter_nodes(tree: RewriteTree) -> Iterator[RewriteTree]:
    yield tree
    match tree:
        case Union(children) | Intersection(children):
            for child in children:
                yield from iter_nodes(child)
        case Exclusion(base, subtract):
            yield from iter_nodes(base)
            yield from iter_nodes(subtract)


def tree_depth(tree: RewriteTree) -> int:
    match tree:
        case Union(children) | Intersection(children):
            return 1 + max((tree_depth(child) for child in children), default=0)
        case Exclusion(base, subtract):
            return 1 + max(tree_depth(base), tree_depth(subtract))
        case _:
            return 1


def has_direct(tree: RewriteTree) -> bool:
    return any(isinstance(node, Direct) for node in iter_nodes(tree))


# --- Conditions ---

class ParamType(str, Enum):
    TIMESTAMP = "timestamp"
    TEXT = "text"
    INTEGER = "integer"
    TEXT_LIST = "text_list"


# Left operand -> (request parameter name, parameter type)
CONDITION_PARAMETERS: Mapping[LeftOperand, tuple[str, ParamType]] = {
    LeftOperand.DATE_TIME: ("current_time", ParamType.TIMESTAMP),
    LeftOperand.PURPOSE: ("purpose", ParamType.TEXT),
    LeftOperand.COUNT: ("count", ParamType.INTEGER),
}


def parameter_for(constraint: Constraint) -> tuple[str, ParamType]:
    return CONDITION_PARAMETERS[constraint.left_operand]


@dataclass(frozen=True)
class ConditionDef:
    """A named predicate over request/tuple context.

    The predicate is a conjunction of constraints; each constraint compares
    the parameter bound to its left operand with its right operand.
    """

    name: str
    parameters: Mapping[str, ParamType]
    predicate: tuple[Constraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "parameters", dict(sorted(self.parameters.items())))
        object.__setattr__(self, "predicate", tuple(self.predicate))

    def variables(self) -> list[str]:
        return [parameter_for(constraint)[0] for constraint in self.predicate]


# --- Types ---

@dataclass(frozen=True, order=True)
class AssignableType:
    type: str
    relation: Optional[str] = None
    condition: Optional[str] = None

    def sort_key(self) -> tuple[str, str, str]:
        return (self.type, self.relation or "", self.condition or "")


@dataclass(frozen=True)
class TypeDefinition:
    name: str
    relations: Mapping[str, RewriteTree] = field(default_factory=dict)
    assignable_user_types: Mapping[str, tuple[AssignableType, ...]] = field(default_factory=dict)

    def __post_init__(self):
        # Canonical order: relations by name, assignable entries sorted and de-duplicated
        object.__setattr__(self, "relations", dict(sorted(self.relations.items())))
        object.__setattr__(self, "assignable_user_types", {
            relation: tuple(sorted(set(entries), key=AssignableType.sort_key))
            for relation, entries in sorted(self.assignable_user_types.items())
        })


@dataclass(frozen=True)
class AuthorizationModel:
    type_definitions: tuple[TypeDefinition, ...] = ()
    conditions: Mapping[str, ConditionDef] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "type_definitions", tuple(sorted(self.type_definitions, key=lambda t: t.name)))
        object.__setattr__(self, "conditions", dict(sorted(self.conditions.items())))

    def type(self, name: str) -> Optional[TypeDefinition]:
        return next((t for t in self.type_definitions if t.name == name), None)

    def relation(self, type_name: str, relation: str) -> Optional[RewriteTree]:
        type_def = self.type(type_name)
        return None if type_def is None else type_def.relations.get(relation)


# --- Objects, users, tuples ---

def _check_part(value: str, what: str) -> None:
    if not isinstance(value, str) or not value or ":" in value or "#" in value:
        raise MalformedDocument(f"Invalid {what} {value!r}")


@dataclass(frozen=True, order=True)
class ObjectRef:
    type: str
    id: str

    def __post_init__(self):
        _check_part(self.type, "type name")
        _check_part(self.id, "object id")

    @classmethod
    def parse(cls, text: str) -> "ObjectRef":
        if not isinstance(text, str) or text.count(":") != 1:
            raise MalformedDocument(f"Expected 'type:id', got {text!r}")
        type_name, object_id = text.split(":")
        return cls(type_name, object_id)

    def __str__(self):
        return f"{self.type}:{self.id}"


@dataclass(frozen=True, order=True)
class UserRef:
    """Either a direct object ('user:alice') or a userset ('asset:ds1#consumer')."""

    object: ObjectRef
    relation: Optional[str] = None

    def __post_init__(self):
        if self.relation is not None:
            _check_part(self.relation, "relation")

    @property
    def is_userset(self) -> bool:
        return self.relation is not None

    @classmethod
    def parse(cls, text: str) -> "UserRef":
        if not isinstance(text, str):
            raise MalformedDocument(f"Expected a user reference, got {text!r}")
        base, sep, relation = text.partition("#")
        return cls(ObjectRef.parse(base), relation if sep else None)

    def __str__(self):
        return f"{self.object}#{self.relation}" if self.relation else str(self.object)


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(item) for item in value)
    if isinstance(value, dict):
        raise MalformedDocument("Condition context values cannot be objects")
    return value


def _thaw(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_thaw(item) for item in value]
    return value


@dataclass(frozen=True)
class TupleCondition:
    name: str
    context: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def of(cls, name: str, context: Optional[Mapping[str, Any]] = None) -> "TupleCondition":
        return cls(name, tuple(sorted((key, _freeze(value)) for key, value in (context or {}).items())))

    def context_dict(self) -> dict[str, Any]:
        return {key: _thaw(value) for key, value in self.context}


@dataclass(frozen=True)
class RelationshipTuple:
    user: UserRef
    relation: str
    object: ObjectRef
    condition: Optional[TupleCondition] = None

    def __post_init__(self):
        _check_part(self.relation, "relation")

    def sort_key(self) -> tuple:
        condition = self.condition
        return (
            str(self.object), self.relation, str(self.user),
            condition.name if condition else "", repr(condition.context) if condition else "",
        )

    def to_record(self) -> dict:
        record: dict[str, Any] = {"user": str(self.user), "relation": self.relation, "object": str(self.object)}
        if self.condition is not None:
            record["condition"] = {"name": self.condition.name, "context": self.condition.context_dict()}
        return record

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "RelationshipTuple":
        if not isinstance(record, Mapping):
            raise MalformedDocument("A tuple must be an object")
        for key in ("user", "relation", "object"):
            if not isinstance(record.get(key), str):
                raise MalformedDocument(f"Tuple field '{key}' must be text")
        condition = None
        raw_condition = record.get("condition")
        if raw_condition:
            if not isinstance(raw_condition, Mapping) or not isinstance(raw_condition.get("name"), str):
                raise MalformedDocument("Tuple condition needs a name")
            context = raw_condition.get("context") or {}
            if not isinstance(context, Mapping):
                raise MalformedDocument("Tuple condition context must be an object")
            condition = TupleCondition.of(raw_condition["name"], context)
        return cls(
            user=UserRef.parse(record["user"]),
            relation=record["relation"],
            object=ObjectRef.parse(record["object"]),
            condition=condition,
        )

    def __str__(self):
        suffix = f" [{self.condition.name}]" if self.condition else ""
        return f"{self.user} {self.relation} {self.object}{suffix}"


def sort_tuples(tuples) -> list[RelationshipTuple]:
    return sorted(set(tuples), key=RelationshipTuple.sort_key)
