"""
OpenFGA 1.1 JSON interchange.

Export renders a model into the canonical `.fga.json` text; import reads the
same shape back. Condition expressions are produced from the structured
predicate and read back with a closed grammar that accepts exactly the forms
export writes, e.g. `current_time <= timestamp("2026-01-01T00:00:00Z")`,
`purpose == "research"` or `purpose in ["audit", "research"]`, joined by ` && `.
"""

from __future__ import annotations

import json
import re
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from ..errors import InvalidModel, MalformedDocument
from ..policy.data import Constraint, Timestamp
from ..policy.registry import Operator
from ..policy.validation import has_errors
from ..utils.logging import get_logger
from .model import (
    CONDITION_PARAMETERS,
    AssignableType,
    AuthorizationModel,
    ComputedUserset,
    ConditionDef,
    Direct,
    Exclusion,
    Intersection,
    ParamType,
    RewriteTree,
    TupleToUserset,
    TypeDefinition,
    Union,
    parameter_for,
)
from .validation import validate_model

logger = get_logger(__name__)


# --- Document shape ---

class _Doc(BaseModel):
    model_config = ConfigDict(extra="ignore")


class ObjectRelationDoc(_Doc):
    object: Optional[str] = None
    relation: str


class TupleToUsersetDoc(_Doc):
    tupleset: ObjectRelationDoc
    computedUserset: ObjectRelationDoc


class UsersetsDoc(_Doc):
    child: list["UsersetDoc"]


class DifferenceDoc(_Doc):
    base: "UsersetDoc"
    subtract: "UsersetDoc"


class UsersetDoc(_Doc):
    this: Optional[dict] = None
    computedUserset: Optional[ObjectRelationDoc] = None
    tupleToUserset: Optional[TupleToUsersetDoc] = None
    union: Optional[UsersetsDoc] = None
    intersection: Optional[UsersetsDoc] = None
    difference: Optional[DifferenceDoc] = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "UsersetDoc":
        present = [name for name in type(self).model_fields if getattr(self, name) is not None]
        if len(present) != 1:
            raise ValueError(f"a rewrite node needs exactly one operator, got {present or 'none'}")
        return self


UsersetsDoc.model_rebuild()
DifferenceDoc.model_rebuild()


class RelationReferenceDoc(_Doc):
    type: str
    relation: Optional[str] = None
    condition: Optional[str] = None


class RelationMetadataDoc(_Doc):
    directly_related_user_types: list[RelationReferenceDoc] = []


class MetadataDoc(_Doc):
    relations: dict[str, RelationMetadataDoc] = {}


class TypeDefinitionDoc(_Doc):
    type: str
    relations: dict[str, UsersetDoc] = {}
    metadata: Optional[MetadataDoc] = None


class ParameterTypeDoc(_Doc):
    type_name: str
    generic_types: Optional[list["ParameterTypeDoc"]] = None


ParameterTypeDoc.model_rebuild()


class ConditionDoc(_Doc):
    name: str
    parameters: dict[str, ParameterTypeDoc] = {}
    expression: str


class ModelDoc(_Doc):
    schema_version: str
    type_definitions: list[TypeDefinitionDoc] = []
    conditions: dict[str, ConditionDoc] = {}


# --- Trees ---

def _tree_to_doc(tree: RewriteTree) -> UsersetDoc:
    match tree:
        case Direct():
            return UsersetDoc(this={})
        case ComputedUserset(relation):
            return UsersetDoc(computedUserset=ObjectRelationDoc(relation=relation))
        case TupleToUserset(tupleset, computed):
            return UsersetDoc(tupleToUserset=TupleToUsersetDoc(
                tupleset=ObjectRelationDoc(relation=tupleset),
                computedUserset=ObjectRelationDoc(relation=computed),
            ))
        case Union(children):
            return UsersetDoc(union=UsersetsDoc(child=[_tree_to_doc(child) for child in children]))
        case Intersection(children):
            return UsersetDoc(intersection=UsersetsDoc(child=[_tree_to_doc(child) for child in children]))
        case Exclusion(base, subtract):
            return UsersetDoc(difference=DifferenceDoc(base=_tree_to_doc(base), subtract=_tree_to_doc(subtract)))
    raise TypeError(f"Not a rewrite node: {tree!r}")


def _tree_from_doc(doc: UsersetDoc) -> RewriteTree:
    if doc.this is not None:
        return Direct()
    if doc.computedUserset is not None:
        return ComputedUserset(doc.computedUserset.relation)
    if doc.tupleToUserset is not None:
        return TupleToUserset(doc.tupleToUserset.tupleset.relation, doc.tupleToUserset.computedUserset.relation)
    if doc.union is not None:
        return Union(tuple(_tree_from_doc(child) for child in doc.union.child))
    if doc.intersection is not None:
        return Intersection(tuple(_tree_from_doc(child) for child in doc.intersection.child))
    return Exclusion(_tree_from_doc(doc.difference.base), _tree_from_doc(doc.difference.subtract))


# --- Conditions ---

_PARAM_TYPE_NAMES = {
    ParamType.TIMESTAMP: "TYPE_NAME_TIMESTAMP",
    ParamType.TEXT: "TYPE_NAME_STRING",
    ParamType.INTEGER: "TYPE_NAME_INT",
    ParamType.TEXT_LIST: "TYPE_NAME_LIST",
}
_PARAM_TYPES_BY_NAME = {name: param_type for param_type, name in _PARAM_TYPE_NAMES.items()}

_OPERATOR_SYMBOLS = {
    Operator.EQ: "==",
    Operator.LT: "<",
    Operator.LTEQ: "<=",
    Operator.GT: ">",
    Operator.GTEQ: ">=",
    Operator.IS_ANY_OF: "in",
}
_OPERATORS_BY_SYMBOL = {symbol: operator for operator, symbol in _OPERATOR_SYMBOLS.items()}
_OPERANDS_BY_VARIABLE = {variable: operand for operand, (variable, _) in CONDITION_PARAMETERS.items()}

_STRING = r'"(?:[^"\\]|\\.)*"'
_TERM = re.compile(
    r"(?P<variable>[a-z_]+) (?P<symbol>==|<=|>=|<|>|in) "
    rf"(?P<value>timestamp\({_STRING}\)|{_STRING}|\[(?:[^\]\"]|{_STRING})*\]|-?\d+)"
)
_JOIN = " && "


def _param_to_doc(param_type: ParamType) -> ParameterTypeDoc:
    generic = [ParameterTypeDoc(type_name="TYPE_NAME_STRING")] if param_type == ParamType.TEXT_LIST else None
    return ParameterTypeDoc(type_name=_PARAM_TYPE_NAMES[param_type], generic_types=generic)


def _param_from_doc(doc: ParameterTypeDoc, path: str) -> ParamType:
    param_type = _PARAM_TYPES_BY_NAME.get(doc.type_name)
    if param_type is None:
        raise MalformedDocument(f"Unsupported parameter type '{doc.type_name}' at {path}")
    if param_type == ParamType.TEXT_LIST and [g.type_name for g in doc.generic_types or ()] != ["TYPE_NAME_STRING"]:
        raise MalformedDocument(f"Only lists of strings are supported at {path}")
    return param_type


def _render_value(value: Any) -> str:
    match value:
        case Timestamp():
            return f"timestamp({json.dumps(value.to_text())})"
        case tuple():
            return "[" + ", ".join(_render_value(item) for item in value) + "]"
        case _:
            return json.dumps(value, ensure_ascii=False)


def render_expression(condition: ConditionDef) -> str:
    terms = []
    for constraint in condition.predicate:
        variable, _ = parameter_for(constraint)
        terms.append(f"{variable} {_OPERATOR_SYMBOLS[constraint.operator]} {_render_value(constraint.right_operand)}")
    return _JOIN.join(terms)


def _read_value(text: str) -> Any:
    if text.startswith("timestamp("):
        return Timestamp.parse(json.loads(text[len("timestamp("):-1]))
    value = json.loads(text)
    return tuple(value) if isinstance(value, list) else value


def parse_expression(expression: str, path: str = "") -> tuple[Constraint, ...]:
    """Read back an expression produced by `render_expression`."""
    constraints = []
    position = 0
    while True:
        match = _TERM.match(expression, position)
        if match is None or match["variable"] not in _OPERANDS_BY_VARIABLE:
            raise MalformedDocument(f"Unsupported condition expression at {path}: {expression!r}")
        try:
            value = _read_value(match["value"])
        except (json.JSONDecodeError, MalformedDocument) as e:
            raise MalformedDocument(f"Bad value in condition expression at {path}: {e}")
        constraints.append(Constraint(
            _OPERANDS_BY_VARIABLE[match["variable"]], _OPERATORS_BY_SYMBOL[match["symbol"]], value,
        ))
        position = match.end()
        if position == len(expression):
            return tuple(constraints)
        if not expression.startswith(_JOIN, position):
            raise MalformedDocument(f"Unsupported condition expression at {path}: {expression!r}")
        position += len(_JOIN)


# --- Models ---

def model_to_document(model: AuthorizationModel) -> dict:
    type_docs = []
    for type_def in model.type_definitions:
        metadata = None
        if any(type_def.assignable_user_types.values()):
            metadata = MetadataDoc(relations={
                relation: RelationMetadataDoc(directly_related_user_types=[
                    RelationReferenceDoc(type=entry.type, relation=entry.relation, condition=entry.condition)
                    for entry in entries
                ])
                for relation, entries in type_def.assignable_user_types.items()
                if entries
            })
        type_docs.append(TypeDefinitionDoc(
            type=type_def.name,
            relations={name: _tree_to_doc(tree) for name, tree in type_def.relations.items()},
            metadata=metadata,
        ))
    doc = ModelDoc(
        schema_version=model.schema_version,
        type_definitions=type_docs,
        conditions={
            name: ConditionDoc(
                name=condition.name,
                parameters={param: _param_to_doc(t) for param, t in condition.parameters.items()},
                expression=render_expression(condition),
            )
            for name, condition in model.conditions.items()
        },
    )
    return doc.model_dump(mode="json", exclude_none=True)


def export_model(model: AuthorizationModel) -> bytes:
    """
    Render the canonical interchange text for a valid model.

    Raises:
        InvalidModel: If the model has Error diagnostics.
    """
    diagnostics = validate_model(model)
    if has_errors(diagnostics):
        raise InvalidModel("Refusing to export an invalid model", diagnostics)
    return (json.dumps(model_to_document(model), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def model_from_document(raw: Any) -> AuthorizationModel:
    try:
        doc = ModelDoc.model_validate(raw)
    except ValidationError as e:
        raise MalformedDocument(f"Not an authorization model document: {e.errors()[0]['msg']}")

    type_definitions = []
    for type_doc in doc.type_definitions:
        assignable = {}
        if type_doc.metadata is not None:
            for relation, meta in type_doc.metadata.relations.items():
                if meta.directly_related_user_types:
                    assignable[relation] = tuple(
                        AssignableType(ref.type, ref.relation, ref.condition)
                        for ref in meta.directly_related_user_types
                    )
        type_definitions.append(TypeDefinition(
            name=type_doc.type,
            relations={name: _tree_from_doc(node) for name, node in type_doc.relations.items()},
            assignable_user_types=assignable,
        ))

    conditions = {}
    for key, condition_doc in doc.conditions.items():
        path = f"/conditions/{key}"
        conditions[key] = ConditionDef(
            name=condition_doc.name,
            parameters={
                param: _param_from_doc(param_doc, f"{path}/parameters/{param}")
                for param, param_doc in condition_doc.parameters.items()
            },
            predicate=parse_expression(condition_doc.expression, f"{path}/expression"),
        )

    return AuthorizationModel(
        type_definitions=tuple(type_definitions),
        conditions=conditions,
        schema_version=doc.schema_version,
    )


def import_model(document: bytes | str) -> AuthorizationModel:
    """
    Read interchange text back into a model.

    Raises:
        MalformedDocument: If the text is not JSON of the interchange shape.
        InvalidModel: If the model breaks a structural rule, including an
            unsupported schema version.
    """
    try:
        text = bytes(document).decode("utf-8") if isinstance(document, (bytes, bytearray)) else document
        raw = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError, TypeError) as e:
        raise MalformedDocument(f"Model document is not valid JSON: {e}")
    model = model_from_document(raw)
    diagnostics = validate_model(model)
    if has_errors(diagnostics):
        raise InvalidModel("Imported model is invalid", diagnostics)
    logger.debug(f"Imported model with {len(model.type_definitions)} type(s)")
    return model
