"""Tuple files: one canonical JSON record per line, `#` lines are comments."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from ..errors import MalformedDocument, UnknownTypeOrRelation
from .model import AuthorizationModel, RelationshipTuple, sort_tuples

IRI_MAP_HEADER = "# iri-map "


@dataclass(frozen=True)
class TupleFile:
    tuples: tuple[RelationshipTuple, ...]
    # 'type:id' -> the IRI the id was derived from
    iri_map: Mapping[str, str] = field(default_factory=dict)


def render_tuple(relationship: RelationshipTuple) -> str:
    return json.dumps(relationship.to_record(), ensure_ascii=False)


def parse_tuple_line(line: str, where: str = "") -> RelationshipTuple:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedDocument(f"Bad tuple record{' at ' + where if where else ''}: {e}")
    return RelationshipTuple.from_record(record)


def read_tuple_file(text: str | bytes) -> TupleFile:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedDocument(f"Tuple file is not UTF-8: {e}")
    tuples = []
    iri_map: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith(IRI_MAP_HEADER):
            try:
                iri_map.update(json.loads(stripped[len(IRI_MAP_HEADER):]))
            except (json.JSONDecodeError, TypeError, ValueError):
                raise MalformedDocument(f"Bad iri-map header at line {number}")
            continue
        if stripped.startswith("#"):
            continue
        tuples.append(parse_tuple_line(stripped, f"line {number}"))
    return TupleFile(tuple(tuples), iri_map)


def render_tuple_file(tuples: Iterable[RelationshipTuple], iri_map: Optional[Mapping[str, str]] = None) -> bytes:
    """Canonical tuple file: optional iri-map header, then sorted de-duplicated records."""
    lines = []
    if iri_map:
        lines.append(IRI_MAP_HEADER + json.dumps(dict(sorted(iri_map.items())), ensure_ascii=False))
    lines.extend(render_tuple(t) for t in sort_tuples(tuples))
    return "".join(f"{line}\n" for line in lines).encode("utf-8")


def check_tuple(model: AuthorizationModel, relationship: RelationshipTuple) -> None:
    """
    Make sure a tuple fits the model's declared types and relations.

    Raises:
        UnknownTypeOrRelation: If the object type, relation, user type or
            condition is not declared for this relation.
    """
    type_def = model.type(relationship.object.type)
    if type_def is None:
        raise UnknownTypeOrRelation(f"Unknown type '{relationship.object.type}' in {relationship}")
    if relationship.relation not in type_def.relations:
        raise UnknownTypeOrRelation(f"Unknown relation '{type_def.name}#{relationship.relation}' in {relationship}")
    condition = relationship.condition.name if relationship.condition else None
    user = relationship.user
    for entry in type_def.assignable_user_types.get(relationship.relation, ()):
        if entry.type == user.object.type and entry.relation == user.relation and entry.condition == condition:
            return
    raise UnknownTypeOrRelation(f"Tuple {relationship} does not match any directly related user type")
