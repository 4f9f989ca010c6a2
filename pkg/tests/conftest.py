"""Shared fixtures and the acceptance-criteria reporting hook."""

from importlib.resources import files

import pytest

from thimble.problem import Problem

_ACCEPTANCE_LINES: list[str] = []


def problem_path(name: str) -> str:
    return str(files("thimble") / "problems" / f"{name}.json")


@pytest.fixture()
def record_criterion():
    def _record(number: int, passed: bool, detail: str):
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES.append(
            f"ACCEPTANCE CRITERION {number}: {status} — {detail}")
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def demo2d_tachyonic() -> Problem:
    return Problem.load(problem_path("demo-2d-tachyonic"))


@pytest.fixture(scope="session")
def demo2d_printed() -> Problem:
    return Problem.load(problem_path("demo-2d"))


@pytest.fixture(scope="session")
def demo3d_tachyonic() -> Problem:
    return Problem.load(problem_path("demo-3d-tachyonic"))


@pytest.fixture(scope="session")
def advection_diffusion() -> Problem:
    return Problem.load(problem_path("advection-diffusion"))


@pytest.fixture(scope="session")
def shared_results() -> dict:
    """Cross-test cache so acceptance criteria can reuse expensive analyses."""
    return {}
