"""Conformance of check against the fixpoint oracle on generated instances."""

from hypothesis import given, settings
from hypothesis import strategies as st
from strategies import OBJECT_IDS, USER_IDS, check_requests, rebac_models, relationship_tuples

from odsc.check import CheckRequest, check, expand, flatten, oracle_check
from odsc.rebac import ObjectRef, UserRef
from odsc.store import StoreState


@st.composite
def instances(draw, cyclic=False):
    model = draw(rebac_models(cyclic=cyclic))
    tuples = draw(relationship_tuples(model))
    request = draw(check_requests(model))
    return StoreState.of(tuples, model), model, request


@settings(max_examples=1000)
@given(instances())
def test_check_agrees_with_the_oracle(instance):
    snapshot, model, request = instance
    decision = check(snapshot, model, request)
    assert decision.allowed == oracle_check(snapshot, model, request).allowed
    # stratified models never close a cycle
    assert not decision.cycle_detected


@settings(max_examples=300)
@given(instances(cyclic=True))
def test_check_agrees_with_the_oracle_on_cyclic_models(instance):
    snapshot, model, request = instance
    assert check(snapshot, model, request).allowed == oracle_check(snapshot, model, request).allowed


@given(instances())
def test_memoization_is_sound(instance):
    snapshot, model, request = instance
    with_memo = check(snapshot, model, request)
    without = check(snapshot, model, request, memoize=False)
    assert with_memo.allowed == without.allowed
    assert with_memo.nodes_visited <= without.nodes_visited


@given(instances())
def test_check_is_deterministic(instance):
    snapshot, model, request = instance
    assert check(snapshot, model, request) == check(snapshot, model, request)


@given(st.data())
def test_adding_a_tuple_never_revokes_access_without_exclusion(data):
    model = data.draw(rebac_models(cyclic=True))
    tuples = data.draw(relationship_tuples(model))
    extra = data.draw(relationship_tuples(model, max_size=1))
    request = data.draw(check_requests(model, contextual=False))
    before = check(StoreState.of(tuples, model), model, request)
    after = check(StoreState.of(tuples | extra, model), model, request)
    assert after.allowed or not before.allowed


@settings(max_examples=300)
@given(st.data())
def test_flattened_expand_is_the_set_of_allowed_users(data):
    model = data.draw(rebac_models())
    snapshot = StoreState.of(data.draw(relationship_tuples(model, conditions=False)), model)
    for type_def in model.type_definitions:
        for relation in type_def.relations:
            for object_id in OBJECT_IDS:
                obj = ObjectRef(type_def.name, object_id)
                expanded = {u for u in flatten(expand(snapshot, model, obj, relation)) if u.startswith("user:")}
                allowed = {
                    f"user:{name}" for name in USER_IDS
                    if check(snapshot, model, CheckRequest(obj, relation, UserRef(ObjectRef("user", name)))).allowed
                }
                assert expanded == allowed, (obj, relation)
