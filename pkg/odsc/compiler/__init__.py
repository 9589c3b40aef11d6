from .backends import BACKENDS, CompilerBackend, OpenFgaBackend, get_backend
from .core import (
    ASSET_TYPE,
    USER_TYPE,
    CompilationResult,
    compile_constraint,
    compile_policy,
    compile_policy_set,
    deny_relation,
    effective_relation,
    grant_relation,
)
from .obligations import ObligationRecord, render_obligations
