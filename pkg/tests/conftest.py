import time

import pytest

ACCEPTANCE_LINES: list = []


class _Recorder:
    def __init__(self, number: int, limit: float):
        self.number = number
        self.limit = limit
        self.t0 = time.perf_counter()

    def finish(self, ok: bool, detail: str = "") -> bool:
        elapsed = time.perf_counter() - self.t0
        passed = bool(ok) and elapsed < self.limit
        line = (f"{'PASS' if passed else 'FAIL'} criterion {self.number}: {detail} "
                f"[{elapsed:.2f} s, limit {self.limit:g} s]")
        ACCEPTANCE_LINES.append((self.number, line))
        print(line)
        return passed


@pytest.fixture
def criterion():
    """``criterion(number, limit_seconds)`` starts the clock for one acceptance criterion."""
    return _Recorder


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
