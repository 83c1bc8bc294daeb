import warnings

import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def record_acceptance():
    """Collect one pass/fail line per acceptance criterion; the lines are
    printed immediately and repeated in the terminal summary."""

    def _record(number, name, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        line = f"ACCEPTANCE {number:2d} {name}: {status}" + (
            f"  ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _quiet_beta_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*beta=.*")
        yield
