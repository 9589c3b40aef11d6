import pytest

from odsc.errors import MalformedDocument, UnknownTerm
from odsc.policy.registry import (
    ODRL_NAMESPACE,
    ODS_NAMESPACE,
    REGISTRY,
    Iri,
    LeftOperand,
    Operator,
    ParentClass,
    resolve_left_operand,
    resolve_operator,
    resolve_term,
)

PROFILE_TERMS = {
    "ods:Consumer": ParentClass.PARTY,
    "ods:Provider": ParentClass.PARTY,
    "ods:Broker": ParentClass.PARTY,
    "ods:Monitor": ParentClass.PARTY,
    "ods:Train": ParentClass.ACTION,
    "ods:Subscribe": ParentClass.ACTION,
    "ods:Request_data": ParentClass.ACTION,
    "ods:Retention": ParentClass.ACTION,
    "ods:Kill_job": ParentClass.ACTION,
}


@pytest.mark.parametrize("label,parent_class", sorted(PROFILE_TERMS.items()))
def test_every_profile_term_resolves_with_its_parent_class(label, parent_class):
    entry = resolve_term(label)
    assert entry.label == label
    assert entry.parent_class == parent_class
    assert entry.iri.value.startswith(ODS_NAMESPACE)


def test_registry_holds_profile_and_core_subset():
    labels = {entry.label for entry in REGISTRY}
    assert set(PROFILE_TERMS) <= labels
    assert {"odrl:use", "odrl:read", "odrl:modify", "odrl:distribute", "odrl:delete"} <= labels
    assert len(labels) == len(REGISTRY)


def test_retention_definition():
    entry = resolve_term("ods:Retention")
    assert entry.parent_class == ParentClass.ACTION
    assert "maximum data retention period" in entry.definition


def test_core_terms_live_in_the_odrl_namespace():
    entry = resolve_term("odrl:use")
    assert entry.label == "odrl:use"
    assert entry.iri == Iri(ODRL_NAMESPACE + "use")
    assert not entry.is_ods


@pytest.mark.parametrize("text", ["ods:train", "ODS:TRAIN", f"{ODS_NAMESPACE}Train", "  ods:Train "])
def test_matching_ignores_case_and_accepts_full_iris(text):
    assert resolve_term(text).label == "ods:Train"


@pytest.mark.parametrize("text", ["ods:Destroy", "odrl:play", "Train", "", "https://example.org/Train"])
def test_unknown_terms(text):
    with pytest.raises(UnknownTerm):
        resolve_term(text)


def test_iri_equality_ignores_case_in_scheme_and_host_only():
    assert Iri("HTTPS://Example.ORG/Data") == Iri("https://example.org/Data")
    assert Iri("https://example.org/Data") != Iri("https://example.org/data")
    assert len({Iri("https://EXAMPLE.org/x"), Iri("https://example.org/x")}) == 1


@pytest.mark.parametrize("text", ["not an iri", "relative/path", ""])
def test_iri_must_be_absolute(text):
    with pytest.raises(MalformedDocument):
        Iri(text)


def test_operands_and_operators_accept_prefixed_forms():
    assert resolve_left_operand("odrl:dateTime") == LeftOperand.DATE_TIME
    assert resolve_left_operand(ODRL_NAMESPACE + "purpose") == LeftOperand.PURPOSE
    assert resolve_operator("LTEQ") == Operator.LTEQ
    assert resolve_operator("odrl:isAnyOf") == Operator.IS_ANY_OF
    with pytest.raises(UnknownTerm) as info:
        resolve_operator("between", "/permission/0/constraint/0/operator")
    assert info.value.kind == "operator"
