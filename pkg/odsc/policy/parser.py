"""Reading and writing the compact JSON policy form."""

from __future__ import annotations

import json
from typing import Any, Optional

from ..errors import MalformedDocument, MissingRequired, UnknownTerm
from ..utils.logging import get_logger
from .data import (
    ActionTerm,
    Constraint,
    LeftOperand,
    OdrlPolicy,
    PartyRef,
    PolicyKind,
    Rule,
    Timestamp,
)
from .registry import (
    PREFIXES,
    Iri,
    ParentClass,
    action_for,
    has_known_prefix,
    resolve_left_operand,
    resolve_operator,
    resolve_term,
    role_for,
)

logger = get_logger(__name__)

POLICY_KEYS = ("@context", "@type", "uid", "profile", "assigner", "assignee", "permission", "prohibition", "obligation")
RULE_KEYS = ("action", "target", "assigner", "assignee", "constraint", "duty")
CONSTRAINT_KEYS = ("leftOperand", "operator", "rightOperand", "unit")
RULE_LISTS = ("permission", "prohibition", "obligation")


def _as_list(value: Any, path: str) -> list:
    if value is None:
        return []
    if isinstance(value, dict):
        return [value]
    if not isinstance(value, list):
        raise MalformedDocument(f"Expected a list at {path}")
    return value


def _identifier(value: Any, path: str) -> str:
    """Accept either plain text or an object carrying 'uid' / '@id'."""
    if isinstance(value, dict):
        value = value.get("uid", value.get("@id"))
    if not isinstance(value, str) or not value.strip():
        raise MalformedDocument(f"Expected an identifier at {path}")
    return value.strip()


def _iri(value: Any, path: str) -> Iri:
    try:
        return Iri(_identifier(value, path))
    except MalformedDocument as e:
        raise MalformedDocument(f"{e.message} at {path}")


class _PolicyReader:
    """Walks a decoded document, resolving every term against the registry."""

    def __init__(self):
        self.unknown_keys: list[str] = []

    def _note_unknown(self, raw: dict, known: tuple[str, ...], path: str) -> None:
        for key in raw:
            if key not in known:
                self.unknown_keys.append(f"{path}/{key}")

    def read(self, raw: dict) -> OdrlPolicy:
        self._note_unknown(raw, POLICY_KEYS, "")

        kind_text = raw.get("@type", PolicyKind.SET.value)
        if not isinstance(kind_text, str):
            raise MalformedDocument("@type must be text")
        kind_local = kind_text.split(":", 1)[-1].lower()
        policy_kind = next((k for k in PolicyKind if k.value.lower() == kind_local), None)
        if policy_kind is None:
            raise MalformedDocument(f"Unknown policy @type '{kind_text}'")

        if not raw.get("uid"):
            raise MissingRequired("Policy has no uid", "/uid")
        uid = _iri(raw["uid"], "/uid")

        profile_raw = raw.get("profile", [])
        if isinstance(profile_raw, str):
            profile_raw = [profile_raw]
        profile = tuple(_iri(item, f"/profile/{i}") for i, item in enumerate(_as_list(profile_raw, "/profile")))

        assigner = self._party(raw.get("assigner"), "/assigner")
        assignee = self._party(raw.get("assignee"), "/assignee")

        rule_lists = {}
        for key in RULE_LISTS:
            rule_lists[key] = tuple(
                self._rule(item, f"/{key}/{i}")
                for i, item in enumerate(_as_list(raw.get(key), f"/{key}"))
            )
        if not any(rule_lists.values()):
            raise MissingRequired("Policy contains no rules", "/")

        if self.unknown_keys:
            logger.debug(f"Ignoring unknown keys: {', '.join(self.unknown_keys)}")
        return OdrlPolicy(
            uid=uid,
            policy_kind=policy_kind,
            profile=profile,
            permissions=rule_lists["permission"],
            prohibitions=rule_lists["prohibition"],
            obligations=rule_lists["obligation"],
            assigner=assigner,
            assignee=assignee,
            unknown_keys=tuple(self.unknown_keys),
        )

    def _rule(self, raw: Any, path: str, parent_target: Optional[Iri] = None) -> Rule:
        if not isinstance(raw, dict):
            raise MalformedDocument(f"Expected a rule object at {path}")
        self._note_unknown(raw, RULE_KEYS, path)

        if raw.get("action") is None:
            raise MissingRequired("Rule has no action", f"{path}/action")
        action = self._action(raw["action"], f"{path}/action")

        if raw.get("target") is not None:
            target = _iri(raw["target"], f"{path}/target")
        elif parent_target is not None:
            target = parent_target
        else:
            raise MissingRequired("Rule has no target", f"{path}/target")

        constraints = tuple(
            self._constraint(item, f"{path}/constraint/{i}")
            for i, item in enumerate(_as_list(raw.get("constraint"), f"{path}/constraint"))
        )
        duties = tuple(
            self._rule(item, f"{path}/duty/{i}", parent_target=target)
            for i, item in enumerate(_as_list(raw.get("duty"), f"{path}/duty"))
        )
        return Rule(
            action=action,
            target=target,
            assigner=self._party(raw.get("assigner"), f"{path}/assigner"),
            assignee=self._party(raw.get("assignee"), f"{path}/assignee"),
            constraints=constraints,
            duties=duties,
        )

    def _action(self, raw: Any, path: str) -> ActionTerm:
        text = _identifier(raw, path)
        try:
            entry = resolve_term(text)
        except UnknownTerm:
            raise UnknownTerm(text, "action", path)
        if entry.parent_class != ParentClass.ACTION:
            raise UnknownTerm(text, "action", path)
        return ActionTerm.of(action_for(entry))

    def _party(self, raw: Any, path: str) -> Optional[PartyRef]:
        if raw is None:
            return None
        text = _identifier(raw, path)
        try:
            entry = resolve_term(text)
        except UnknownTerm:
            if has_known_prefix(text):
                raise UnknownTerm(text, "party", path)
            return PartyRef.concrete(_iri(text, path))
        if entry.parent_class != ParentClass.PARTY:
            raise UnknownTerm(text, "party", path)
        return PartyRef.of_role(role_for(entry))

    def _constraint(self, raw: Any, path: str) -> Constraint:
        if not isinstance(raw, dict):
            raise MalformedDocument(f"Expected a constraint object at {path}")
        self._note_unknown(raw, CONSTRAINT_KEYS, path)
        for key in ("leftOperand", "operator", "rightOperand"):
            if raw.get(key) is None:
                raise MissingRequired(f"Constraint has no {key}", f"{path}/{key}")

        left = resolve_left_operand(_unwrap(raw["leftOperand"]), f"{path}/leftOperand")
        operator = resolve_operator(_unwrap(raw["operator"]), f"{path}/operator")
        value = _unwrap(raw["rightOperand"])
        if isinstance(value, list):
            value = tuple(_unwrap(item) for item in value)
        elif isinstance(value, dict):
            raise MalformedDocument(f"Unsupported rightOperand object at {path}/rightOperand")
        elif isinstance(value, float):
            value = int(value) if value.is_integer() else str(value)
        if left == LeftOperand.DATE_TIME and isinstance(value, str):
            try:
                value = Timestamp.parse(value)
            except MalformedDocument:
                # left as text; validation reports the mismatch
                pass

        unit = raw.get("unit")
        return Constraint(left, operator, value, None if unit is None else str(unit))


def _unwrap(value: Any) -> Any:
    if isinstance(value, dict) and "@value" in value:
        return value["@value"]
    if isinstance(value, dict) and "@id" in value:
        return value["@id"]
    return value


def parse_policy(document: bytes | str) -> OdrlPolicy:
    """
    Parse a policy in the compact JSON form.

    Args:
        document: UTF-8 encoded (or already decoded) policy text.

    Returns:
        The fully resolved policy. Keys the parser does not know are listed in
        `unknown_keys` instead of failing the parse.

    Raises:
        MalformedDocument: If the text is not a JSON object or a value has the wrong shape.
        UnknownTerm: If an action, party or operand resolves to no registry entry.
        MissingRequired: If the uid, every rule, or a rule's action/target is missing.
    """
    try:
        text = bytes(document).decode("utf-8") if isinstance(document, (bytes, bytearray)) else document
        raw = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError, TypeError) as e:
        raise MalformedDocument(f"Policy document is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise MalformedDocument("Policy document must be a JSON object")
    return _PolicyReader().read(raw)


def _render_operand(value) -> Any:
    match value:
        case Timestamp():
            return value.to_text()
        case tuple():
            return [_render_operand(item) for item in value]
        case _:
            return value


def _render_rule(rule: Rule) -> dict:
    doc: dict[str, Any] = {"action": rule.action.label, "target": rule.target.value}
    if rule.assigner is not None:
        doc["assigner"] = rule.assigner.to_text()
    if rule.assignee is not None:
        doc["assignee"] = rule.assignee.to_text()
    if rule.constraints:
        doc["constraint"] = []
        for constraint in rule.constraints:
            entry = {
                "leftOperand": constraint.left_operand.value,
                "operator": constraint.operator.value,
                "rightOperand": _render_operand(constraint.right_operand),
            }
            if constraint.unit is not None:
                entry["unit"] = constraint.unit
            doc["constraint"].append(entry)
    if rule.duties:
        doc["duty"] = [_render_rule(duty) for duty in rule.duties]
    return doc


def policy_to_document(policy: OdrlPolicy) -> dict:
    doc: dict[str, Any] = {
        "@context": dict(PREFIXES),
        "@type": policy.policy_kind.value,
        "uid": policy.uid.value,
    }
    if policy.profile:
        doc["profile"] = [iri.value for iri in policy.profile]
    if policy.assigner is not None:
        doc["assigner"] = policy.assigner.to_text()
    if policy.assignee is not None:
        doc["assignee"] = policy.assignee.to_text()
    for key, rules in zip(RULE_LISTS, (policy.permissions, policy.prohibitions, policy.obligations)):
        if rules:
            doc[key] = [_render_rule(rule) for rule in rules]
    return doc


def serialize_policy(policy: OdrlPolicy) -> bytes:
    """Emit the canonical compact form: fixed key order, two-space indent, trailing newline."""
    return (json.dumps(policy_to_document(policy), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
