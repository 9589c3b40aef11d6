from .conditions import MissingParameter, evaluate_condition
from .engine import MAX_DEPTH, CheckRequest, Checker, Decision, ExpandNode, check, expand, flatten
from .oracle import oracle_check
