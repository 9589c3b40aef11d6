import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from odsc.compiler import compile_policy
from odsc.policy import parse_policy
from odsc.preferences import get_preferences

settings.register_profile(
    "ci",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("dev", max_examples=50, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

TESTS_DIR = Path(__file__).parent
CORPUS_DIR = TESTS_DIR / "corpus"
GOLDEN_DIR = TESTS_DIR / "golden"


def corpus_path(name: str) -> Path:
    return CORPUS_DIR / f"{name}.json"


def load_policy(name: str):
    return parse_policy(corpus_path(name).read_bytes())


def compiled(name: str):
    return compile_policy(load_policy(name))


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Tests never see the caller's odsc settings."""
    for key in list(os.environ):
        if key.startswith("ODS_"):
            monkeypatch.delenv(key, raising=False)
    get_preferences({}, environ={})
    yield
    get_preferences({}, environ={})
