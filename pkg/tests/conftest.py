import numpy as np
import pytest

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome; printed in the terminal summary."""

    def record(number, passed, detail):
        """``passed=None`` marks a criterion that is recorded but not run."""
        _RESULTS[number] = (passed if passed is None else bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        passed, detail = _RESULTS[number]
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} -- {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
