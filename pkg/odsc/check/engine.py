"""
Check and expand by recursive userset-rewrite resolution.

A check asks whether one user is in the userset denoted by (object,
relation). Resolution walks the relation's rewrite tree; Direct leaves look at
stored and contextual tuples, evaluating tuple conditions against the merged
tuple and request context. Missing context fails closed. Revisiting a
(object, relation) pair that is still being resolved cuts the branch to false,
as does going deeper than MAX_DEPTH. Results that never hit such a cut are
memoized for the rest of the request.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Protocol

from ..errors import MalformedContext, TypeMismatch, UnknownTypeOrRelation
from ..rebac.model import (
    AuthorizationModel,
    ComputedUserset,
    Direct,
    Exclusion,
    Intersection,
    ObjectRef,
    RelationshipTuple,
    RewriteTree,
    TupleToUserset,
    Union,
    UserRef,
    sort_tuples,
)
from ..rebac.tuples import check_tuple
from ..utils.logging import get_logger
from .conditions import MissingParameter, evaluate_condition

logger = get_logger(__name__)

MAX_DEPTH = 25


class TupleSource(Protocol):
    def tuples_for(self, object_ref: ObjectRef, relation: str) -> Iterable[RelationshipTuple]: ...


@dataclass(frozen=True)
class CheckRequest:
    object: ObjectRef
    relation: str
    user: UserRef
    context: Mapping[str, Any] = field(default_factory=dict)
    contextual_tuples: tuple[RelationshipTuple, ...] = ()


@dataclass(frozen=True)
class Decision:
    allowed: bool
    nodes_visited: int = 0
    # Greater than MAX_DEPTH when the depth cap cut a branch
    max_depth_reached: int = 0
    cycle_detected: bool = False
    missing_context: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {
            "allowed": self.allowed,
            "nodes_visited": self.nodes_visited,
            "max_depth_reached": self.max_depth_reached,
            "cycle_detected": self.cycle_detected,
            "missing_context": list(self.missing_context),
        }


class _WithContextual:
    """Stored tuples overlaid with request-scoped contextual tuples."""

    def __init__(self, snapshot: TupleSource, contextual: Iterable[RelationshipTuple]):
        self.snapshot = snapshot
        self.extra: dict[tuple[ObjectRef, str], list[RelationshipTuple]] = {}
        for relationship in sort_tuples(contextual):
            self.extra.setdefault((relationship.object, relationship.relation), []).append(relationship)

    def tuples_for(self, object_ref: ObjectRef, relation: str) -> list[RelationshipTuple]:
        stored = list(self.snapshot.tuples_for(object_ref, relation))
        extra = self.extra.get((object_ref, relation))
        if not extra:
            return stored
        return sort_tuples([*stored, *extra])


def validate_request(model: AuthorizationModel, request: CheckRequest) -> None:
    """
    Raises:
        UnknownTypeOrRelation: If the object type or relation is not in the
            model, or a contextual tuple does not fit it.
    """
    if model.relation(request.object.type, request.relation) is None:
        raise UnknownTypeOrRelation(f"Unknown relation '{request.object.type}#{request.relation}'")
    for relationship in request.contextual_tuples:
        check_tuple(model, relationship)


class TupleConditions:
    """Evaluates tuple conditions for one request, recording missing parameters."""

    def __init__(self, model: AuthorizationModel, context: Mapping[str, Any]):
        self.model = model
        self.context = dict(context)
        self.missing: set[str] = set()

    def holds(self, relationship: RelationshipTuple) -> bool:
        if relationship.condition is None:
            return True
        condition = self.model.conditions.get(relationship.condition.name)
        if condition is None:
            return False
        try:
            outcome = evaluate_condition(condition, relationship.condition.context_dict(), self.context)
        except TypeMismatch as e:
            raise MalformedContext(e.message)
        if isinstance(outcome, MissingParameter):
            self.missing.update(outcome.names)
            return False
        return outcome


class Checker:
    """Resolves one check request. Not shared between requests."""

    def __init__(self, snapshot: TupleSource, model: AuthorizationModel, request: CheckRequest,
                 memoize: bool = True, max_depth: int = MAX_DEPTH):
        self.model = model
        self.request = request
        self.tuples = _WithContextual(snapshot, request.contextual_tuples)
        self.conditions = TupleConditions(model, request.context)
        self.memoize = memoize
        self.max_depth = max_depth
        self.memo: dict[tuple[ObjectRef, str], bool] = {}
        self.in_progress: set[tuple[ObjectRef, str]] = set()
        self.nodes_visited = 0
        self.max_depth_reached = 0
        self.cycle_detected = False

    def run(self) -> Decision:
        allowed, _ = self._resolve(self.request.object, self.request.relation, 1)
        return Decision(
            allowed=allowed,
            nodes_visited=self.nodes_visited,
            max_depth_reached=self.max_depth_reached,
            cycle_detected=self.cycle_detected,
            missing_context=tuple(sorted(self.conditions.missing)),
        )

    def _resolve(self, object_ref: ObjectRef, relation: str, depth: int) -> tuple[bool, bool]:
        """Return (allowed, cut) where cut means a cycle or the depth cap shaped the answer."""
        self.nodes_visited += 1
        self.max_depth_reached = max(self.max_depth_reached, depth)
        key = (object_ref, relation)
        if key in self.memo:
            return self.memo[key], False
        if depth > self.max_depth:
            return False, True
        if key in self.in_progress:
            self.cycle_detected = True
            return False, True
        tree = self.model.relation(object_ref.type, relation)
        if tree is None:
            return False, False

        self.in_progress.add(key)
        try:
            allowed, cut = self._evaluate(object_ref, relation, tree, depth)
        finally:
            self.in_progress.discard(key)
        if self.memoize and not cut:
            self.memo[key] = allowed
        logger.debug(f"{object_ref}#{relation} @ {self.request.user}: {allowed}")
        return allowed, cut

    def _evaluate(self, object_ref: ObjectRef, relation: str, tree: RewriteTree, depth: int) -> tuple[bool, bool]:
        self.nodes_visited += 1
        match tree:
            case Direct():
                return self._direct(object_ref, relation, depth)
            case ComputedUserset(other):
                return self._resolve(object_ref, other, depth + 1)
            case TupleToUserset(tupleset, computed):
                cut = False
                for relationship in self.tuples.tuples_for(object_ref, tupleset):
                    if not self.conditions.holds(relationship):
                        continue
                    target = relationship.user.object
                    if self.model.relation(target.type, computed) is None:
                        continue
                    allowed, child_cut = self._resolve(target, computed, depth + 1)
                    cut = cut or child_cut
                    if allowed:
                        return True, cut
                return False, cut
            case Union(children):
                cut = False
                for child in children:
                    allowed, child_cut = self._evaluate(object_ref, relation, child, depth)
                    cut = cut or child_cut
                    if allowed:
                        return True, cut
                return False, cut
            case Intersection(children):
                cut = False
                for child in children:
                    allowed, child_cut = self._evaluate(object_ref, relation, child, depth)
                    cut = cut or child_cut
                    if not allowed:
                        return False, cut
                return True, cut
            case Exclusion(base, subtract):
                allowed, cut = self._evaluate(object_ref, relation, base, depth)
                if not allowed:
                    return False, cut
                excluded, subtract_cut = self._evaluate(object_ref, relation, subtract, depth)
                return not excluded, cut or subtract_cut
        raise TypeError(f"Not a rewrite node: {tree!r}")

    def _direct(self, object_ref: ObjectRef, relation: str, depth: int) -> tuple[bool, bool]:
        cut = False
        user = self.request.user
        for relationship in self.tuples.tuples_for(object_ref, relation):
            if relationship.user == user:
                if self.conditions.holds(relationship):
                    return True, cut
                continue
            if not relationship.user.is_userset or not self.conditions.holds(relationship):
                continue
            allowed, child_cut = self._resolve(relationship.user.object, relationship.user.relation, depth + 1)
            cut = cut or child_cut
            if allowed:
                return True, cut
        return False, cut


def check(snapshot: TupleSource, model: AuthorizationModel, request: CheckRequest,
          memoize: bool = True) -> Decision:
    """
    Decide whether `request.user` has `request.relation` on `request.object`.

    Raises:
        UnknownTypeOrRelation: If the request or a contextual tuple does not fit the model.
        MalformedContext: If a context value has the wrong type for its parameter.
    """
    validate_request(model, request)
    decision = Checker(snapshot, model, request, memoize=memoize).run()
    logger.debug(
        f"check {request.user} {request.relation} {request.object}: "
        f"{'allowed' if decision.allowed else 'denied'} ({decision.nodes_visited} nodes)"
    )
    return decision


# --- Expand ---

@dataclass(frozen=True)
class ExpandNode:
    """
    One node of an expanded userset.

    `kind` is one of: relation, direct, computed, tupleset, union,
    intersection, exclusion, cycle, depth. Direct nodes list the users of
    matching tuples in `users`; every other node combines its children.
    """

    kind: str
    object: Optional[str] = None
    relation: Optional[str] = None
    users: tuple[str, ...] = ()
    children: tuple["ExpandNode", ...] = ()

    def to_record(self) -> dict:
        record: dict[str, Any] = {"kind": self.kind}
        if self.object is not None:
            record["object"] = self.object
        if self.relation is not None:
            record["relation"] = self.relation
        if self.users:
            record["users"] = list(self.users)
        if self.children:
            record["children"] = [child.to_record() for child in self.children]
        return record


class _Expander:
    def __init__(self, snapshot: TupleSource, model: AuthorizationModel, max_depth: int):
        self.snapshot = snapshot
        self.model = model
        self.max_depth = max_depth
        self.conditions = TupleConditions(model, {})
        self.in_progress: set[tuple[ObjectRef, str]] = set()

    def relation(self, object_ref: ObjectRef, relation: str, depth: int) -> ExpandNode:
        key = (object_ref, relation)
        if depth > self.max_depth:
            return ExpandNode("depth", str(object_ref), relation)
        if key in self.in_progress:
            return ExpandNode("cycle", str(object_ref), relation)
        tree = self.model.relation(object_ref.type, relation)
        if tree is None:
            return ExpandNode("relation", str(object_ref), relation)
        self.in_progress.add(key)
        try:
            child = self.node(object_ref, relation, tree, depth)
        finally:
            self.in_progress.discard(key)
        return ExpandNode("relation", str(object_ref), relation, children=(child,))

    def node(self, object_ref: ObjectRef, relation: str, tree: RewriteTree, depth: int) -> ExpandNode:
        match tree:
            case Direct():
                users, children = [], []
                for relationship in self.snapshot.tuples_for(object_ref, relation):
                    if not self.conditions.holds(relationship):
                        continue
                    users.append(str(relationship.user))
                    if relationship.user.is_userset:
                        children.append(self.relation(relationship.user.object, relationship.user.relation, depth + 1))
                return ExpandNode("direct", users=tuple(users), children=tuple(children))
            case ComputedUserset(other):
                return ExpandNode("computed", relation=other, children=(self.relation(object_ref, other, depth + 1),))
            case TupleToUserset(tupleset, computed):
                children = []
                for relationship in self.snapshot.tuples_for(object_ref, tupleset):
                    target = relationship.user.object
                    if self.conditions.holds(relationship) and self.model.relation(target.type, computed) is not None:
                        children.append(self.relation(target, computed, depth + 1))
                return ExpandNode("tupleset", relation=tupleset, children=tuple(children))
            case Union(children):
                return ExpandNode("union", children=tuple(self.node(object_ref, relation, c, depth) for c in children))
            case Intersection(children):
                return ExpandNode("intersection", children=tuple(self.node(object_ref, relation, c, depth) for c in children))
            case Exclusion(base, subtract):
                return ExpandNode("exclusion", children=(
                    self.node(object_ref, relation, base, depth),
                    self.node(object_ref, relation, subtract, depth),
                ))
        raise TypeError(f"Not a rewrite node: {tree!r}")


def expand(snapshot: TupleSource, model: AuthorizationModel, object_ref: ObjectRef, relation: str,
           max_depth: int = MAX_DEPTH) -> ExpandNode:
    """
    Expand (object, relation) into a tree mirroring its rewrite structure.

    Conditioned tuples are included only when their own context satisfies
    the condition.

    Raises:
        UnknownTypeOrRelation: If the relation is not defined on the object's type.
    """
    if model.relation(object_ref.type, relation) is None:
        raise UnknownTypeOrRelation(f"Unknown relation '{object_ref.type}#{relation}'")
    return _Expander(snapshot, model, max_depth).relation(object_ref, relation, 1)


def flatten(node: ExpandNode) -> frozenset[str]:
    """The set of users an expand tree denotes."""
    match node.kind:
        case "intersection":
            sets = [flatten(child) for child in node.children]
            return frozenset.intersection(*sets) if sets else frozenset()
        case "exclusion":
            base, subtract = node.children
            return flatten(base) - flatten(subtract)
        case "cycle" | "depth":
            return frozenset()
        case _:
            members = set(node.users)
            for child in node.children:
                members |= flatten(child)
            return frozenset(members)
