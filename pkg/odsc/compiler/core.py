"""
Lowering of validated policies into an authorization model, relationship
tuples and obligation records.

Every action used by a permission or prohibition gets three relations on the
`asset` type:

    <a>_grant   Direct from `user` (also condition-qualified when a permission
                carries constraints)
    <a>_deny    Direct from `user`, plus a branch per role-scoped prohibition
    can_<a>     Exclusion(<a>_grant | role branches..., <a>_deny)

Role relations `consumer`, `provider`, `broker` and `monitor` are always
present; their membership tuples come from the deployment.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from ..errors import IdCollision, UnsupportedConstruct, ValidationFailed
from ..policy.data import Constraint, OdrlPolicy, PartyRef, PolicyKind, Rule, RuleKind, Timestamp
from ..policy.registry import Action, Iri, LeftOperand, PartyRole
from ..policy.validation import Diagnostic, has_errors, sort_diagnostics, validate
from ..rebac.builder import ModelBuilder
from ..rebac.model import (
    AssignableType,
    AuthorizationModel,
    ComputedUserset,
    ConditionDef,
    Direct,
    Exclusion,
    ObjectRef,
    RelationshipTuple,
    TupleCondition,
    Union,
    UserRef,
    parameter_for,
    sort_tuples,
)
from ..utils import derive_id
from ..utils.logging import get_logger
from .obligations import ObligationRecord, obligation_record

logger = get_logger(__name__)

USER_TYPE = "user"
ASSET_TYPE = "asset"
ROLE_ORDER = tuple(PartyRole)


def grant_relation(action: Action) -> str:
    return f"{action.value}_grant"


def deny_relation(action: Action) -> str:
    return f"{action.value}_deny"


def effective_relation(action: Action) -> str:
    return f"can_{action.value}"


@dataclass(frozen=True)
class CompilationResult:
    model: AuthorizationModel
    tuples: tuple[RelationshipTuple, ...] = ()
    obligations: tuple[ObligationRecord, ...] = ()
    diagnostics: tuple[Diagnostic, ...] = ()
    # 'type:id' -> source IRI, written as the tuple file header
    iri_map: Mapping[str, str] = field(default_factory=dict)


# --- Constraints ---

def _canonical_operand(value) -> str:
    match value:
        case Timestamp():
            return value.to_text()
        case tuple():
            return json.dumps(list(value), ensure_ascii=False)
        case _:
            return json.dumps(value, ensure_ascii=False)


def _condition_name(constraints: tuple[Constraint, ...]) -> str:
    first = constraints[0]
    digest_source = ";".join(
        f"{c.left_operand.value}|{c.operator.value}|{_canonical_operand(c.right_operand)}" for c in constraints
    )
    digest = hashlib.sha256(digest_source.encode("utf-8")).hexdigest()[:8]
    return f"cond_{first.left_operand.value.lower()}_{first.operator.value.lower()}_{digest}"


def _compile_constraints(constraints: Iterable[Constraint], role_hint: Optional[str], path: str) -> ConditionDef:
    predicate = []
    parameters = {}
    for index, constraint in enumerate(constraints):
        where = f"{path}/constraint/{index}" if path else ""
        if role_hint in {role.value for role in PartyRole}:
            raise UnsupportedConstruct(f"Constraints on a permission for role '{role_hint}' have no mapping", where)
        if constraint.left_operand == LeftOperand.COUNT:
            raise UnsupportedConstruct("Count constraints need a usage-control runtime", where)
        variable, param_type = parameter_for(constraint)
        parameters[variable] = param_type
        # units never reach the condition
        predicate.append(Constraint(constraint.left_operand, constraint.operator, constraint.right_operand))
    predicate = tuple(predicate)
    return ConditionDef(name=_condition_name(predicate), parameters=parameters, predicate=predicate)


def compile_constraint(constraint: Constraint, role_hint: Optional[str] = None) -> ConditionDef:
    """
    Lower one constraint to a named condition.

    Args:
        constraint: A well-formed DateTime or Purpose constraint.
        role_hint: The role the constrained permission is scoped to, if any.

    Raises:
        UnsupportedConstruct: For Count constraints and role-scoped permissions.
    """
    return _compile_constraints((constraint,), role_hint, "")


# --- Lowering ---

@dataclass
class _ActionShape:
    role_grants: set = field(default_factory=set)
    role_denies: set = field(default_factory=set)
    conditions: set = field(default_factory=set)


class _Lowering:
    def __init__(self, policy: OdrlPolicy):
        self.policy = policy
        self.actions: dict[Action, _ActionShape] = {}
        self.conditions: dict[str, ConditionDef] = {}
        self.tuples: list[RelationshipTuple] = []
        self.obligations: list[ObligationRecord] = []
        self.iri_map: dict[str, str] = {}
        self._ids: dict[str, Iri] = {}

    def object_ref(self, type_name: str, iri: Iri, path: str) -> ObjectRef:
        object_id = derive_id(iri.value)
        if not object_id:
            raise UnsupportedConstruct(f"Cannot derive an id from '{iri.value}'", path)
        key = f"{type_name}:{object_id}"
        seen = self._ids.setdefault(key, iri)
        if seen != iri:
            raise IdCollision(object_id, seen.value, iri.value)
        self.iri_map[key] = seen.value
        return ObjectRef(type_name, object_id)

    def user_ref(self, party: PartyRef, path: str) -> UserRef:
        return UserRef(self.object_ref(USER_TYPE, party.identity, path))

    def shape(self, action: Action) -> _ActionShape:
        return self.actions.setdefault(action, _ActionShape())

    def assignee(self, rule: Rule) -> PartyRef:
        # No assignee means whoever consumes the asset
        return self.policy.effective_assignee(rule) or PartyRef.of_role(PartyRole.CONSUMER)

    def lower(self) -> None:
        agreement = self.policy.policy_kind == PolicyKind.AGREEMENT
        for path, kind, rule in self.policy.rules():
            if kind == RuleKind.OBLIGATION:
                self.obligations.append(obligation_record(rule, path, self.policy.uid))
                continue
            asset = self.object_ref(ASSET_TYPE, rule.target, f"{path}/target")
            if kind == RuleKind.PERMISSION:
                self.permission(rule, path, asset)
            else:
                self.prohibition(rule, path, asset)
            assigner = self.policy.effective_assigner(rule)
            if agreement and assigner is not None and not assigner.is_role:
                self.tuples.append(RelationshipTuple(
                    self.user_ref(assigner, f"{path}/assigner"), PartyRole.PROVIDER.value, asset,
                ))
            for index, duty in enumerate(rule.duties):
                self.obligations.append(obligation_record(duty, f"{path}/duty/{index}", self.policy.uid))

    def permission(self, rule: Rule, path: str, asset: ObjectRef) -> None:
        action = rule.action.term
        shape = self.shape(action)
        assignee = self.assignee(rule)
        condition = None
        if rule.constraints:
            condition = _compile_constraints(
                rule.constraints, assignee.role.value if assignee.is_role else None, path,
            )
            self.conditions[condition.name] = condition
            shape.conditions.add(condition.name)
        if assignee.is_role:
            shape.role_grants.add(assignee.role)
            return
        self.tuples.append(RelationshipTuple(
            self.user_ref(assignee, f"{path}/assignee"),
            grant_relation(action),
            asset,
            TupleCondition.of(condition.name) if condition else None,
        ))

    def prohibition(self, rule: Rule, path: str, asset: ObjectRef) -> None:
        if rule.constraints:
            raise UnsupportedConstruct("Constraints on prohibitions have no mapping", f"{path}/constraint/0")
        action = rule.action.term
        shape = self.shape(action)
        assignee = self.assignee(rule)
        if assignee.is_role:
            shape.role_denies.add(assignee.role)
            return
        self.tuples.append(RelationshipTuple(self.user_ref(assignee, f"{path}/assignee"), deny_relation(action), asset))

    def build(self) -> AuthorizationModel:
        builder = ModelBuilder()
        builder.add_type(USER_TYPE)
        direct_user = (AssignableType(USER_TYPE),)
        for role in ROLE_ORDER:
            builder.add_relation(ASSET_TYPE, role.value, Direct(), direct_user)
        for condition in self.conditions.values():
            builder.add_condition(condition)

        for action, shape in self.actions.items():
            grant, deny = grant_relation(action), deny_relation(action)
            grant_users = direct_user + tuple(AssignableType(USER_TYPE, condition=name) for name in shape.conditions)
            builder.add_relation(ASSET_TYPE, grant, Direct(), grant_users)

            deny_roles = [ComputedUserset(role.value) for role in ROLE_ORDER if role in shape.role_denies]
            builder.add_relation(ASSET_TYPE, deny, Union((Direct(), *deny_roles)) if deny_roles else Direct(), direct_user)

            grant_roles = [ComputedUserset(role.value) for role in ROLE_ORDER if role in shape.role_grants]
            base = Union((ComputedUserset(grant), *grant_roles)) if grant_roles else ComputedUserset(grant)
            builder.add_relation(ASSET_TYPE, effective_relation(action), Exclusion(base, ComputedUserset(deny)))
        return builder.compile()


def _lower(policy: OdrlPolicy) -> CompilationResult:
    diagnostics = validate(policy)
    if has_errors(diagnostics):
        raise ValidationFailed([d for d in diagnostics if d.is_error])
    lowering = _Lowering(policy)
    lowering.lower()
    result = CompilationResult(
        model=lowering.build(),
        tuples=tuple(sort_tuples(lowering.tuples)),
        obligations=tuple(sorted(lowering.obligations, key=ObligationRecord.sort_key)),
        diagnostics=tuple(diagnostics),
        iri_map=dict(sorted(lowering.iri_map.items())),
    )
    logger.debug(
        f"Lowered {policy.uid}: {len(result.tuples)} tuple(s), {len(result.obligations)} obligation(s)"
    )
    return result


def compile_policy(policy: OdrlPolicy) -> CompilationResult:
    """
    Compile one policy.

    Raises:
        ValidationFailed: If validation reports Errors; carries them.
        UnsupportedConstruct: If a rule has no lowering; names the path.
    """
    return compile_policy_set([policy])


def compile_policy_set(policies: Iterable[OdrlPolicy]) -> CompilationResult:
    """
    Compile several policies into one merged result.

    Identical relations unify; tuples and obligations are unioned.

    Raises:
        MergeConflict: If two policies give one relation different trees.
        IdCollision: If two distinct IRIs derive the same object id.
    """
    results = [_lower(policy) for policy in policies]
    if not results:
        raise ValueError("compile_policy_set needs at least one policy")

    builder = ModelBuilder()
    iri_map: dict[str, str] = {}
    for result in results:
        builder.merge(result.model)
        for key, iri in result.iri_map.items():
            seen = iri_map.setdefault(key, iri)
            if Iri(seen) != Iri(iri):
                raise IdCollision(key.split(":", 1)[1], seen, iri)

    merged = CompilationResult(
        model=builder.compile(),
        tuples=tuple(sort_tuples(t for r in results for t in r.tuples)),
        obligations=tuple(sorted((o for r in results for o in r.obligations), key=ObligationRecord.sort_key)),
        diagnostics=tuple(sort_diagnostics(d for r in results for d in r.diagnostics)),
        iri_map=dict(sorted(iri_map.items())),
    )
    logger.info(
        f"Compiled {len(results)} polic{'y' if len(results) == 1 else 'ies'}: "
        f"{len(merged.model.type_definitions)} type(s), {len(merged.tuples)} tuple(s), "
        f"{len(merged.obligations)} obligation(s)"
    )
    return merged
