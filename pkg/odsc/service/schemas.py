"""Request and response bodies, named after the OpenFGA HTTP API fields."""

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..rebac.model import RelationshipTuple


class _Body(BaseModel):
    model_config = ConfigDict(extra="ignore")


class RelationshipConditionBody(_Body):
    name: str
    context: dict[str, Any] = Field(default_factory=dict)


class TupleKeyWithoutCondition(_Body):
    user: str
    relation: str
    object: str


class TupleKey(TupleKeyWithoutCondition):
    condition: Optional[RelationshipConditionBody] = None

    def to_tuple(self) -> RelationshipTuple:
        return RelationshipTuple.from_record(self.model_dump(exclude_none=True))


class TupleKeys(_Body):
    tuple_keys: list[TupleKey] = Field(default_factory=list)


class TupleKeysWithoutCondition(_Body):
    tuple_keys: list[TupleKeyWithoutCondition] = Field(default_factory=list)


class CreateStoreRequest(_Body):
    name: str = ""


class CreateStoreResponse(_Body):
    id: str
    name: str


class WriteAuthorizationModelResponse(_Body):
    authorization_model_id: str


class WriteRequest(_Body):
    writes: Optional[TupleKeys] = None
    deletes: Optional[TupleKeysWithoutCondition] = None
    authorization_model_id: Optional[str] = None


class CheckRequestBody(_Body):
    tuple_key: TupleKeyWithoutCondition
    context: dict[str, Any] = Field(default_factory=dict)
    contextual_tuples: Optional[TupleKeys] = None
    authorization_model_id: Optional[str] = None


class CheckResponse(_Body):
    allowed: bool
    resolution: str = ""


class ErrorBody(_Body):
    code: str
    message: str
