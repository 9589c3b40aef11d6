from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List

from ..errors import InvalidModel, MergeConflict
from ..policy.validation import has_errors
from ..utils.logging import get_logger
from .model import (
    AssignableType,
    AuthorizationModel,
    ConditionDef,
    RewriteTree,
    TypeDefinition,
)
from .validation import validate_model

logger = get_logger(__name__)


@dataclass
class TypeDraft:
    """
    A type under construction.

    Attributes:
        name (str): The type name.
        relations (dict): Relation name -> rewrite tree.
        assignable (dict): Relation name -> set of directly assignable user types.
    """
    name: str
    relations: Dict[str, RewriteTree] = field(default_factory=dict)
    assignable: Dict[str, set] = field(default_factory=dict)


class ModelBuilder:
    """
    Builds an AuthorizationModel declaratively.

    Types, relations, assignable user types and conditions are added by name,
    in any order. Adding the same relation twice is fine as long as the tree
    is identical; assignable user types accumulate. `compile` produces the
    canonical model and refuses one that fails validation.
    """

    def __init__(self):
        self.types: Dict[str, TypeDraft] = {}
        self.conditions: Dict[str, ConditionDef] = {}

    def add_type(self, name: str) -> TypeDraft:
        if name not in self.types:
            logger.debug(f"Adding type {name}")
            self.types[name] = TypeDraft(name)
        return self.types[name]

    def add_relation(self, type_name: str, relation: str, tree: RewriteTree,
                     assignable: Iterable[AssignableType] = ()) -> "ModelBuilder":
        draft = self.add_type(type_name)
        existing = draft.relations.get(relation)
        if existing is not None and existing != tree:
            raise MergeConflict(type_name, relation)
        draft.relations[relation] = tree
        entries = list(assignable)
        if entries:
            draft.assignable.setdefault(relation, set()).update(entries)
        logger.debug(f"Relation {type_name}#{relation} = {tree}")
        return self

    def add_condition(self, condition: ConditionDef) -> "ModelBuilder":
        existing = self.conditions.get(condition.name)
        if existing is not None and existing != condition:
            raise MergeConflict("condition", condition.name)
        self.conditions[condition.name] = condition
        return self

    def merge(self, model: AuthorizationModel) -> "ModelBuilder":
        """
        Fold an existing model into this builder.

        Raises:
            MergeConflict: If a relation of the same name has a different tree.
        """
        for type_def in model.type_definitions:
            self.add_type(type_def.name)
            for relation, tree in type_def.relations.items():
                self.add_relation(type_def.name, relation, tree, type_def.assignable_user_types.get(relation, ()))
        for condition in model.conditions.values():
            self.add_condition(condition)
        return self

    def build(self) -> AuthorizationModel:
        """Assemble the canonical model without validating it."""
        type_definitions: List[TypeDefinition] = []
        for draft in self.types.values():
            type_definitions.append(TypeDefinition(
                name=draft.name,
                relations=dict(draft.relations),
                assignable_user_types={relation: tuple(entries) for relation, entries in draft.assignable.items()},
            ))
        return AuthorizationModel(type_definitions=tuple(type_definitions), conditions=dict(self.conditions))

    def compile(self) -> AuthorizationModel:
        """
        Build and validate the model.

        Raises:
            InvalidModel: If validation reports any Error.
        """
        model = self.build()
        diagnostics = validate_model(model)
        if has_errors(diagnostics):
            raise InvalidModel("Built model is invalid", diagnostics)
        logger.debug(f"Compiled model with {len(model.type_definitions)} type(s)")
        return model
