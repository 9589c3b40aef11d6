from importlib import import_module

submodules = [
    "policy_operators",
    "store_operators",
    "check_operators",
    "service_operators",
]


def get_operators() -> list:
    """Collect the operator classes of every submodule, in subcommand order."""
    operators = []
    for name in submodules:
        module = import_module(f"{__name__}.{name}")
        operators.extend(module.classes)
    return operators
