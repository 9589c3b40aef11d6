"""Term registry for the ODRL core subset and the ODS profile vocabulary."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType

from ..errors import MalformedDocument, UnknownTerm

ODRL_NAMESPACE = "http://www.w3.org/ns/odrl/2/"
# No published namespace exists for the profile; change it here only.
ODS_NAMESPACE = "https://w3id.org/ods/"

PREFIXES = MappingProxyType({"odrl": ODRL_NAMESPACE, "ods": ODS_NAMESPACE})

_IRI_SHAPE = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:\S+$")
_AUTHORITY = re.compile(r"^([^/?#]*)(.*)$", re.DOTALL)


@dataclass(frozen=True, eq=False)
class Iri:
    """An absolute IRI. Equality ignores case in the scheme and host only."""

    value: str

    def __post_init__(self):
        if not isinstance(self.value, str) or not _IRI_SHAPE.match(self.value):
            raise MalformedDocument(f"Not an absolute IRI: {self.value!r}")

    def normalized(self) -> str:
        scheme, _, rest = self.value.partition(":")
        scheme = scheme.lower()
        if not rest.startswith("//"):
            return f"{scheme}:{rest}"
        authority, tail = _AUTHORITY.match(rest[2:]).groups()
        userinfo, at, host = authority.rpartition("@")
        return f"{scheme}://{userinfo}{at}{host.lower()}{tail}"

    def __eq__(self, other):
        if not isinstance(other, Iri):
            return NotImplemented
        return self.normalized() == other.normalized()

    def __hash__(self):
        return hash(self.normalized())

    def __lt__(self, other: "Iri") -> bool:
        return self.normalized() < other.normalized()

    def __str__(self):
        return self.value


ODS_PROFILE = Iri(ODS_NAMESPACE)


class ParentClass(str, Enum):
    PARTY = "Party"
    ACTION = "Action"


class Action(str, Enum):
    """Actions the toolchain understands. Values double as relation name stems."""

    USE = "use"
    READ = "read"
    MODIFY = "modify"
    DISTRIBUTE = "distribute"
    DELETE = "delete"
    TRAIN = "train"
    SUBSCRIBE = "subscribe"
    REQUEST_DATA = "request_data"
    RETENTION = "retention"
    KILL_JOB = "kill_job"


class PartyRole(str, Enum):
    """Data Space party roles. Values double as role relation names."""

    CONSUMER = "consumer"
    PROVIDER = "provider"
    BROKER = "broker"
    MONITOR = "monitor"


class LeftOperand(str, Enum):
    DATE_TIME = "dateTime"
    PURPOSE = "purpose"
    COUNT = "count"


class Operator(str, Enum):
    EQ = "eq"
    LT = "lt"
    LTEQ = "lteq"
    GT = "gt"
    GTEQ = "gteq"
    IS_ANY_OF = "isAnyOf"


ORDERING_OPERATORS = frozenset({Operator.LT, Operator.LTEQ, Operator.GT, Operator.GTEQ})


@dataclass(frozen=True)
class TermRegistryEntry:
    label: str
    parent_class: ParentClass
    definition: str
    iri: Iri

    @property
    def prefix(self) -> str:
        return self.label.split(":", 1)[0]

    @property
    def is_ods(self) -> bool:
        return self.prefix == "ods"


def _entry(label: str, parent_class: ParentClass, definition: str) -> TermRegistryEntry:
    prefix, local = label.split(":", 1)
    return TermRegistryEntry(label, parent_class, definition, Iri(PREFIXES[prefix] + local))


REGISTRY: tuple[TermRegistryEntry, ...] = (
    # ODRL core subset
    _entry("odrl:use", ParentClass.ACTION, "To use the Asset."),
    _entry("odrl:read", ParentClass.ACTION, "To obtain data from the Asset."),
    _entry("odrl:modify", ParentClass.ACTION, "To change existing content of the Asset."),
    _entry("odrl:distribute", ParentClass.ACTION, "To supply the Asset to third parties."),
    _entry("odrl:delete", ParentClass.ACTION, "To permanently remove all copies of the Asset after it has been used."),
    # ODS profile
    _entry("ods:Consumer", ParentClass.PARTY,
           "The Party who acts as the intended user of the data under the Rule. Inherits semantics "
           "from odrl:assignee but is specialized for Data Space consumption roles."),
    _entry("ods:Provider", ParentClass.PARTY,
           "The Party who offers or shares the data asset under the Rule. Specialization of "
           "odrl:assigner for Data Spaces."),
    _entry("ods:Broker", ParentClass.PARTY,
           "The Party who intermediates data exchanges between Providers and Consumers within the Data Space."),
    _entry("ods:Monitor", ParentClass.PARTY,
           "The Party responsible for overseeing compliance with the Rule, without being directly "
           "involved in data usage."),
    _entry("ods:Train", ParentClass.ACTION, "Action to train a machine learning model."),
    _entry("ods:Subscribe", ParentClass.ACTION, "Action to subscribe to a dataset, services, or data stream."),
    _entry("ods:Request_data", ParentClass.ACTION,
           "Action to request specific data from other participants in the data space."),
    _entry("ods:Retention", ParentClass.ACTION,
           "Action that defines the maximum data retention period before deletion or archiving."),
    _entry("ods:Kill_job", ParentClass.ACTION, "Action to kill the current executing job."),
)

_BY_KEY = MappingProxyType({entry.label.lower(): entry for entry in REGISTRY})

ACTION_LABELS = MappingProxyType({
    Action.USE: "odrl:use",
    Action.READ: "odrl:read",
    Action.MODIFY: "odrl:modify",
    Action.DISTRIBUTE: "odrl:distribute",
    Action.DELETE: "odrl:delete",
    Action.TRAIN: "ods:Train",
    Action.SUBSCRIBE: "ods:Subscribe",
    Action.REQUEST_DATA: "ods:Request_data",
    Action.RETENTION: "ods:Retention",
    Action.KILL_JOB: "ods:Kill_job",
})
_ACTION_BY_LABEL = MappingProxyType({label: action for action, label in ACTION_LABELS.items()})

ROLE_LABELS = MappingProxyType({
    PartyRole.CONSUMER: "ods:Consumer",
    PartyRole.PROVIDER: "ods:Provider",
    PartyRole.BROKER: "ods:Broker",
    PartyRole.MONITOR: "ods:Monitor",
})
_ROLE_BY_LABEL = MappingProxyType({label: role for role, label in ROLE_LABELS.items()})


def _compact_key(text: str) -> str:
    """Lowercased compact form of `text`, expanding nothing."""
    stripped = text.strip()
    lowered = stripped.lower()
    for prefix, namespace in PREFIXES.items():
        if lowered.startswith(namespace.lower()):
            return f"{prefix}:{lowered[len(namespace):]}"
    return lowered


def has_known_prefix(text: str) -> bool:
    """True for compact text using one of the fixed prefixes (e.g. 'ods:Anything')."""
    prefix, sep, rest = text.strip().partition(":")
    return bool(sep) and prefix.lower() in PREFIXES and not rest.startswith("//")


def resolve_term(text: str) -> TermRegistryEntry:
    """
    Resolve compact ('ods:Train', 'odrl:use') or absolute IRI text to its registry entry.

    Matching is case-insensitive on both prefix and local name.

    Raises:
        UnknownTerm: If no entry matches.
    """
    if not isinstance(text, str) or not text.strip():
        raise UnknownTerm(str(text))
    entry = _BY_KEY.get(_compact_key(text))
    if entry is None:
        raise UnknownTerm(text)
    return entry


def action_for(entry: TermRegistryEntry) -> Action:
    return _ACTION_BY_LABEL[entry.label]


def role_for(entry: TermRegistryEntry) -> PartyRole:
    return _ROLE_BY_LABEL[entry.label]


def action_iri(action: Action) -> Iri:
    return _BY_KEY[ACTION_LABELS[action].lower()].iri


def _strip_odrl(text: str) -> str:
    lowered = text.strip()
    for candidate in (ODRL_NAMESPACE, "odrl:"):
        if lowered.lower().startswith(candidate.lower()):
            return lowered[len(candidate):]
    return lowered


def resolve_left_operand(text, path: str = "") -> LeftOperand:
    if isinstance(text, str):
        local = _strip_odrl(text).lower()
        for operand in LeftOperand:
            if operand.value.lower() == local:
                return operand
    raise UnknownTerm(str(text), "leftOperand", path)


def resolve_operator(text, path: str = "") -> Operator:
    if isinstance(text, str):
        local = _strip_odrl(text).lower()
        for operator in Operator:
            if operator.value.lower() == local:
                return operator
    raise UnknownTerm(str(text), "operator", path)
