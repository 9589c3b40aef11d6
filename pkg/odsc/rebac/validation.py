"""Structural checks on authorization models."""

from __future__ import annotations

import re
from collections import Counter

from ..policy.validation import Diagnostic, sort_diagnostics
from ..utils.logging import get_logger
from ..utils.version import is_supported_schema
from .model import (
    MAX_TREE_DEPTH,
    AuthorizationModel,
    ComputedUserset,
    Intersection,
    TupleToUserset,
    TypeDefinition,
    Union,
    has_direct,
    iter_nodes,
    parameter_for,
    tree_depth,
)

logger = get_logger(__name__)

IDENTIFIER = re.compile(r"^[a-z][a-z0-9_]*$")


def _relation_path(type_name: str, relation: str) -> str:
    return f"/type_definitions/{type_name}/relations/{relation}"


def _check_tree(model: AuthorizationModel, type_def: TypeDefinition, relation: str, tree) -> list[Diagnostic]:
    found = []
    path = _relation_path(type_def.name, relation)
    depth = tree_depth(tree)
    if depth > MAX_TREE_DEPTH:
        found.append(Diagnostic.make("FGA007", path, f"depth {depth}"))

    for node in iter_nodes(tree):
        match node:
            case Union(children) | Intersection(children) if len(children) < 2:
                found.append(Diagnostic.make("FGA006", path, f"{type(node).__name__.lower()} with {len(children)} child(ren)"))
            case ComputedUserset(name) if name not in type_def.relations:
                found.append(Diagnostic.make("FGA002", path, f"{type_def.name}#{name}"))
            case TupleToUserset(tupleset, computed):
                if tupleset not in type_def.relations:
                    found.append(Diagnostic.make("FGA002", path, f"{type_def.name}#{tupleset}"))
                    continue
                # The computed relation must exist on some type the tupleset can point at
                targets = [entry.type for entry in type_def.assignable_user_types.get(tupleset, ())]
                reachable = [model.type(name) for name in targets if model.type(name) is not None]
                if reachable and not any(computed in target.relations for target in reachable):
                    found.append(Diagnostic.make("FGA002", path, f"{'|'.join(targets)}#{computed}"))
    return found


def validate_model(model: AuthorizationModel) -> list[Diagnostic]:
    """
    Check every structural invariant of an authorization model.

    Returns:
        Diagnostics in the same shape as policy validation, all with Error
        severity. An empty list means the model is usable.
    """
    found: list[Diagnostic] = []
    if not is_supported_schema(model.schema_version):
        found.append(Diagnostic.make("FGA008", "/schema_version", repr(model.schema_version)))

    counts = Counter(type_def.name for type_def in model.type_definitions)
    for name, count in counts.items():
        if count > 1:
            found.append(Diagnostic.make("FGA001", f"/type_definitions/{name}", f"defined {count} times"))

    for type_def in model.type_definitions:
        if not IDENTIFIER.match(type_def.name):
            found.append(Diagnostic.make("FGA005", f"/type_definitions/{type_def.name}", repr(type_def.name)))
        for relation, tree in type_def.relations.items():
            path = _relation_path(type_def.name, relation)
            if not IDENTIFIER.match(relation):
                found.append(Diagnostic.make("FGA005", path, repr(relation)))
            found.extend(_check_tree(model, type_def, relation, tree))
            declared = bool(type_def.assignable_user_types.get(relation))
            if has_direct(tree) != declared:
                detail = "direct leaf without user types" if not declared else "user types without a direct leaf"
                found.append(Diagnostic.make("FGA004", path, detail))

        for relation, entries in type_def.assignable_user_types.items():
            path = _relation_path(type_def.name, relation)
            if relation not in type_def.relations:
                found.append(Diagnostic.make("FGA004", path, "user types for an undefined relation"))
            for entry in entries:
                target = model.type(entry.type)
                if target is None:
                    found.append(Diagnostic.make("FGA010", path, f"type '{entry.type}'"))
                elif entry.relation is not None and entry.relation not in target.relations:
                    found.append(Diagnostic.make("FGA010", path, f"'{entry.type}#{entry.relation}'"))
                if entry.condition is not None and entry.condition not in model.conditions:
                    found.append(Diagnostic.make("FGA003", path, f"condition '{entry.condition}'"))

    for key, condition in model.conditions.items():
        path = f"/conditions/{key}"
        if not IDENTIFIER.match(key) or condition.name != key:
            found.append(Diagnostic.make("FGA005", path, repr(condition.name)))
        if not condition.predicate:
            found.append(Diagnostic.make("FGA009", path, "empty predicate"))
        for constraint in condition.predicate:
            variable, param_type = parameter_for(constraint)
            if condition.parameters.get(variable) != param_type:
                found.append(Diagnostic.make("FGA009", path, f"'{variable}' must be declared as {param_type.value}"))

    diagnostics = sort_diagnostics(found)
    if diagnostics:
        logger.debug(f"Model has {len(diagnostics)} problem(s)")
    return diagnostics
