"""Shared fixtures: the two bundled problems and their constants tables."""
from __future__ import annotations

from importlib import resources

import pytest

from hamcert.cli import LoadedProblem, load_problem
from hamcert.constants import ConstantsTable, compute_table

# one line per acceptance criterion, printed in the terminal summary so the
# PASS/FAIL verdicts are visible even when every test passes
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.ensure_newline()
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def bundled_path(name: str) -> str:
    return str(resources.files("hamcert") / "problems" / name)


@pytest.fixture(scope="session")
def sign_changing() -> LoadedProblem:
    """The bundled sign-changing example (polynomial expression kernels)."""
    return load_problem(bundled_path("sign_changing.prob"))


@pytest.fixture(scope="session")
def third_order() -> LoadedProblem:
    """The bundled third-order example (two Green kernels, hatted cone)."""
    return load_problem(bundled_path("third_order.prob"))


@pytest.fixture(scope="session")
def sign_table(sign_changing: LoadedProblem) -> ConstantsTable:
    return compute_table(sign_changing.problem)


@pytest.fixture(scope="session")
def third_table(third_order: LoadedProblem) -> ConstantsTable:
    return compute_table(third_order.problem)
