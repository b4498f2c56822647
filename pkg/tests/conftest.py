import json
from pathlib import Path

import pytest
from hypothesis import settings

from mbp.cli import load_config

FIXTURES = Path(__file__).parent / "fixtures"

VALID = [
    "hermite_2x2",
    "laguerre_2x2",
    "jacobi_2x2",
    "hermite_n3",
    "hermite_n4",
    "laguerre_n3",
    "laguerre_n4",
    "jacobi_n4",
]
TWO_BY_TWO = VALID[:3]
CORRUPTED = [
    "bad_jacobi_sum",
    "bad_equal_hermite_shifts",
    "bad_integer_laguerre_gap",
    "bad_zero_a",
]

settings.register_profile("mbp", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("mbp")


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.json"


def load_fixture(name: str, env=None):
    return load_config(fixture_path(name), env={} if env is None else env)


def fixture_json(name: str) -> dict:
    return json.loads(fixture_path(name).read_text())


@pytest.fixture(params=VALID)
def valid_spec(request):
    return load_fixture(request.param)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
