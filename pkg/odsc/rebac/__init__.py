from .builder import ModelBuilder
from .interchange import export_model, import_model, render_expression
from .model import (
    AssignableType,
    AuthorizationModel,
    ComputedUserset,
    ConditionDef,
    Direct,
    Exclusion,
    Intersection,
    ObjectRef,
    ParamType,
    RelationshipTuple,
    RewriteTree,
    TupleCondition,
    TupleToUserset,
    TypeDefinition,
    Union,
    UserRef,
)
from .tuples import TupleFile, check_tuple, read_tuple_file, render_tuple_file
from .validation import validate_model
