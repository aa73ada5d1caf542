import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_LINES = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record and assert one acceptance criterion.

    ``criterion(n, ok, detail)`` stores a PASS/FAIL line for the terminal
    summary, then fails the test when ``ok`` is false.
    """

    def check(n: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
        request.config.stash.setdefault(_LINES, {})[n] = line
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
