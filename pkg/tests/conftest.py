import time

import pytest

_CRITERIA: dict[int, str] = {}


class Criterion:
    """Collects one acceptance criterion's verdict and wall time."""

    def __init__(self, number: int, name: str, limit_s: float | None):
        self.number, self.name, self.limit_s = number, name, limit_s
        self.start = time.perf_counter()
        self.failures: list[str] = []
        self.details: list[str] = []

    def check(self, ok: bool, what: str):
        (self.details if ok else self.failures).append(what)

    def finish(self):
        elapsed = time.perf_counter() - self.start
        if self.limit_s is not None and elapsed >= self.limit_s:
            self.failures.append(f"runtime {elapsed:.1f}s >= {self.limit_s:g}s")
        verdict = "FAIL" if self.failures else "PASS"
        note = "; ".join(self.failures or self.details)
        _CRITERIA[self.number] = f"[{verdict}] criterion {self.number:2d} {self.name} ({elapsed:.1f}s): {note}"
        assert not self.failures, "; ".join(self.failures)


@pytest.fixture
def criterion():
    made = []

    def start(number, name, limit_s=None):
        c = Criterion(number, name, limit_s)
        made.append(c)
        return c

    yield start
    for c in made:
        if c.number not in _CRITERIA:  # the test raised before finishing
            _CRITERIA[c.number] = f"[FAIL] criterion {c.number:2d} {c.name}: raised before completing"


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
