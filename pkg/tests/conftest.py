import pytest

from catattr.field import FieldSpec
from catattr.geometry import DEFAULT_PARAMS

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def params():
    return DEFAULT_PARAMS


@pytest.fixture(scope="session")
def spec(params):
    return FieldSpec(params)


@pytest.fixture
def record():
    """Store one acceptance outcome; the terminal summary prints them all."""

    def _record(k: int, passed: bool, detail: str):
        ACCEPTANCE[k] = (passed, detail)
        print(f"ACCEPTANCE {k}: {'PASS' if passed else 'FAIL'}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}")
