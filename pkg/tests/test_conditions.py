import operator as op

import pytest
from hypothesis import given
from hypothesis import strategies as st

from odsc.check import MissingParameter, evaluate_condition
from odsc.check.conditions import coerce, compare
from odsc.errors import TypeMismatch
from odsc.policy import Timestamp
from odsc.policy.data import Constraint
from odsc.policy.registry import LeftOperand, Operator
from odsc.rebac import ConditionDef, ParamType

T = Timestamp.parse("2026-01-01T00:00:00Z")


def _condition(*constraints):
    parameters = {}
    for constraint in constraints:
        if constraint.left_operand == LeftOperand.DATE_TIME:
            parameters["current_time"] = ParamType.TIMESTAMP
        else:
            parameters["purpose"] = ParamType.TEXT
    return ConditionDef("cond_test", parameters, constraints)


UNTIL_T = _condition(Constraint(LeftOperand.DATE_TIME, Operator.LTEQ, T))
RESEARCH_OR_AUDIT = _condition(Constraint(LeftOperand.PURPOSE, Operator.IS_ANY_OF, ("research", "audit")))


def test_inclusive_time_bound():
    assert evaluate_condition(UNTIL_T, {}, {"current_time": T}) is True
    assert evaluate_condition(UNTIL_T, {}, {"current_time": Timestamp(T.seconds + 1)}) is False


def test_purpose_membership():
    assert evaluate_condition(RESEARCH_OR_AUDIT, None, {"purpose": "research"}) is True
    assert evaluate_condition(RESEARCH_OR_AUDIT, None, {"purpose": "resale"}) is False


def test_request_context_overrides_tuple_context():
    assert evaluate_condition(RESEARCH_OR_AUDIT, {"purpose": "resale"}, {"purpose": "audit"}) is True
    assert evaluate_condition(RESEARCH_OR_AUDIT, {"purpose": "audit"}, {"purpose": "resale"}) is False
    assert evaluate_condition(RESEARCH_OR_AUDIT, {"purpose": "audit"}, {}) is True


def test_missing_parameters_are_named():
    both = _condition(
        Constraint(LeftOperand.PURPOSE, Operator.EQ, "research"),
        Constraint(LeftOperand.DATE_TIME, Operator.GT, T),
    )
    assert evaluate_condition(both, {}, {}) == MissingParameter(("current_time", "purpose"))
    assert evaluate_condition(both, {}, {"purpose": "research"}) == MissingParameter(("current_time",))


def test_all_constraints_must_hold():
    window = _condition(
        Constraint(LeftOperand.DATE_TIME, Operator.GTEQ, Timestamp(T.seconds - 10)),
        Constraint(LeftOperand.DATE_TIME, Operator.LT, T),
    )
    assert evaluate_condition(window, {}, {"current_time": Timestamp(T.seconds - 10)}) is True
    assert evaluate_condition(window, {}, {"current_time": T}) is False
    assert evaluate_condition(window, {}, {"current_time": Timestamp(T.seconds - 11)}) is False


@pytest.mark.parametrize("value", [T, T.seconds, "2026-01-01T00:00:00Z", "2026-01-01T01:00:00+01:00"])
def test_timestamp_context_forms(value):
    assert coerce(value, ParamType.TIMESTAMP) == T


@pytest.mark.parametrize("value,param_type", [
    ("yesterday", ParamType.TIMESTAMP),
    (True, ParamType.TIMESTAMP),
    (3, ParamType.TEXT),
    ("3", ParamType.INTEGER),
    (["a", 1], ParamType.TEXT_LIST),
])
def test_type_mismatch(value, param_type):
    with pytest.raises(TypeMismatch):
        coerce(value, param_type, "x")


def test_type_mismatch_during_evaluation():
    with pytest.raises(TypeMismatch):
        evaluate_condition(UNTIL_T, {}, {"current_time": "soon"})


def test_list_valued_context_matches_any_item():
    assert compare(("resale", "audit"), Operator.IS_ANY_OF, ("research", "audit"))
    assert not compare(("resale",), Operator.IS_ANY_OF, ("research", "audit"))


ORDERING = {
    Operator.EQ: op.eq,
    Operator.LT: op.lt,
    Operator.LTEQ: op.le,
    Operator.GT: op.gt,
    Operator.GTEQ: op.ge,
}


@given(
    st.sampled_from(sorted(ORDERING, key=lambda o: o.value)),
    st.integers(min_value=0, max_value=4_000_000_000),
    st.integers(min_value=-5, max_value=5),
)
def test_time_operators_agree_with_plain_comparison(operator, bound, delta):
    condition = _condition(Constraint(LeftOperand.DATE_TIME, operator, Timestamp(bound)))
    now = max(0, bound + delta)
    expected = ORDERING[operator](now, bound)
    assert evaluate_condition(condition, {}, {"current_time": now}) is expected


@given(
    st.lists(st.sampled_from(["research", "audit", "resale", "ads"]), min_size=1, max_size=3, unique=True),
    st.sampled_from(["research", "audit", "resale", "ads"]),
    st.booleans(),
)
def test_purpose_operators_agree_with_set_membership(allowed, purpose, use_list):
    if use_list:
        condition = _condition(Constraint(LeftOperand.PURPOSE, Operator.IS_ANY_OF, tuple(allowed)))
        expected = purpose in allowed
    else:
        condition = _condition(Constraint(LeftOperand.PURPOSE, Operator.EQ, allowed[0]))
        expected = purpose == allowed[0]
    assert evaluate_condition(condition, {"purpose": purpose}, None) is expected
