import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "repro", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repro")

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """``record(n, ok, detail)`` stores one verdict line for the terminal summary."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
