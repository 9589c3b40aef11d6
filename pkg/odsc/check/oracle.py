"""
Reference checker for conformance testing.

Instead of resolving one user top-down, the oracle computes the full userset
of every (object, relation) pair bottom-up and then tests membership. Relations
are grouped into strongly connected components of their dependency graph and
solved in dependency order; each component is iterated from empty sets until
nothing changes. Exclusion subtracts therefore always read finished sets.
Models where an exclusion subtract depends back on its own component are
outside the oracle's contract.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping

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
    iter_nodes,
)
from ..utils.logging import get_logger
from .engine import CheckRequest, Decision, TupleConditions, validate_request

logger = get_logger(__name__)

MAX_TUPLES = 10000

Node = tuple[str, str]  # (type, relation)
Pair = tuple[ObjectRef, str]


def _dependencies(model: AuthorizationModel, tuples: Iterable[RelationshipTuple]) -> dict[Node, set[Node]]:
    graph: dict[Node, set[Node]] = defaultdict(set)
    for type_def in model.type_definitions:
        for relation, tree in type_def.relations.items():
            node = (type_def.name, relation)
            graph.setdefault(node, set())
            for part in iter_nodes(tree):
                match part:
                    case ComputedUserset(other):
                        graph[node].add((type_def.name, other))
                    case TupleToUserset(tupleset, computed):
                        graph[node].add((type_def.name, tupleset))
                        targets = {entry.type for entry in type_def.assignable_user_types.get(tupleset, ())}
                        for target in model.type_definitions:
                            if computed in target.relations and (not targets or target.name in targets):
                                graph[node].add((target.name, computed))
    for relationship in tuples:
        if relationship.user.is_userset:
            source = (relationship.object.type, relationship.relation)
            graph[source].add((relationship.user.object.type, relationship.user.relation))
    return graph


def _components(graph: Mapping[Node, set[Node]]) -> list[list[Node]]:
    """Tarjan's algorithm; components come out dependencies first."""
    index: dict[Node, int] = {}
    low: dict[Node, int] = {}
    stack: list[Node] = []
    on_stack: set[Node] = set()
    result: list[list[Node]] = []
    counter = 0

    def visit(start: Node) -> None:
        nonlocal counter
        work = [(start, iter(sorted(graph.get(start, ()))))]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            node, successors = work[-1]
            advanced = False
            for successor in successors:
                if successor not in index:
                    index[successor] = low[successor] = counter
                    counter += 1
                    stack.append(successor)
                    on_stack.add(successor)
                    work.append((successor, iter(sorted(graph.get(successor, ())))))
                    advanced = True
                    break
                if successor in on_stack:
                    low[node] = min(low[node], index[successor])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                result.append(sorted(component))

    for node in sorted(graph):
        if node not in index:
            visit(node)
    return result


class _Oracle:
    def __init__(self, model: AuthorizationModel, tuples: list[RelationshipTuple], conditions: TupleConditions):
        self.model = model
        self.conditions = conditions
        self.by_key: dict[Pair, list[RelationshipTuple]] = defaultdict(list)
        objects: set[ObjectRef] = set()
        for relationship in tuples:
            self.by_key[(relationship.object, relationship.relation)].append(relationship)
            objects.add(relationship.object)
            objects.add(relationship.user.object)
        self.objects = objects
        self.sets: dict[Pair, frozenset] = {}
        self.evaluations = 0
        self.cyclic = False

    def members(self, pair: Pair) -> frozenset:
        return self.sets.get(pair, frozenset())

    def evaluate(self, object_ref: ObjectRef, relation: str, tree: RewriteTree) -> frozenset:
        self.evaluations += 1
        match tree:
            case Direct():
                found: set[UserRef] = set()
                for relationship in self.by_key.get((object_ref, relation), ()):
                    if not self.conditions.holds(relationship):
                        continue
                    found.add(relationship.user)
                    if relationship.user.is_userset:
                        found |= self.members((relationship.user.object, relationship.user.relation))
                return frozenset(found)
            case ComputedUserset(other):
                return self.members((object_ref, other))
            case TupleToUserset(tupleset, computed):
                found = set()
                for relationship in self.by_key.get((object_ref, tupleset), ()):
                    if self.conditions.holds(relationship):
                        found |= self.members((relationship.user.object, computed))
                return frozenset(found)
            case Union(children):
                return frozenset().union(*(self.evaluate(object_ref, relation, c) for c in children))
            case Intersection(children):
                return frozenset.intersection(*(self.evaluate(object_ref, relation, c) for c in children))
            case Exclusion(base, subtract):
                return self.evaluate(object_ref, relation, base) - self.evaluate(object_ref, relation, subtract)
        raise TypeError(f"Not a rewrite node: {tree!r}")

    def solve(self, graph: Mapping[Node, set[Node]]) -> None:
        for component in _components(graph):
            members = set(component)
            pairs = [
                (obj, relation)
                for type_name, relation in component
                if self.model.relation(type_name, relation) is not None
                for obj in sorted(self.objects)
                if obj.type == type_name
            ]
            if len(component) > 1 or any(node in graph.get(node, ()) for node in members):
                self.cyclic = True
            # Jacobi iteration from empty sets, bounded for non-monotone inputs
            limit = len(pairs) * (len(self.objects) + 1) + 2
            for _ in range(limit):
                updated = {
                    pair: self.evaluate(pair[0], pair[1], self.model.relation(pair[0].type, pair[1]))
                    for pair in pairs
                }
                if all(self.sets.get(pair, frozenset()) == value for pair, value in updated.items()):
                    break
                self.sets.update(updated)
            else:
                logger.warning("Oracle did not converge; the model is outside its contract")


def oracle_check(snapshot, model: AuthorizationModel, request: CheckRequest) -> Decision:
    """
    Reference decision for `request`, computed by fixpoint over every pair.

    Raises:
        UnknownTypeOrRelation: If the request or a contextual tuple does not fit the model.
        MalformedContext: If a context value has the wrong type for its parameter.
    """
    validate_request(model, request)
    tuples = [*getattr(snapshot, "tuples", ()), *request.contextual_tuples]
    if len(tuples) > MAX_TUPLES:
        raise ValueError(f"Oracle handles at most {MAX_TUPLES} tuples")

    conditions = TupleConditions(model, request.context)
    oracle = _Oracle(model, list(dict.fromkeys(tuples)), conditions)
    oracle.objects.add(request.object)
    oracle.solve(_dependencies(model, tuples))
    allowed = request.user in oracle.members((request.object, request.relation))
    return Decision(
        allowed=allowed,
        nodes_visited=oracle.evaluations,
        cycle_detected=oracle.cyclic,
        missing_context=tuple(sorted(conditions.missing)),
    )
