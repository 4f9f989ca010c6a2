"""Fixtures and the acceptance-criterion reporting hook for the plots suite."""

from importlib.resources import files

import pytest

_ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria (plots)")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture()
def record_criterion():
    def _record(number: int, passed: bool, detail: str):
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES.append(
            f"ACCEPTANCE CRITERION {number}: {status} — {detail}")
    return _record


@pytest.fixture(scope="session")
def artifact():
    def _path(name: str) -> str:
        return str(files("thimbleplots") / "artifacts" / name)
    return _path
