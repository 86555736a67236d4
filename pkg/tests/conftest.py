import numpy as np
import pytest

CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary prints them in order."""
    def record(num: int, ok: bool, detail: str = ""):
        prev = CRITERIA.get(num)
        CRITERIA[num] = (ok and (prev is None or prev[0]), detail if prev is None else prev[1] + "; " + detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        ok, detail = CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
