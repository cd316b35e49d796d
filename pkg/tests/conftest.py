import numpy as np
import pytest

from bdabench.comm import run_ranks


@pytest.fixture
def on_ranks():
    """Run ``fn(comm, *args)`` on ``n`` in-process ranks; returns per-rank results."""

    def run(n, fn, *args, timeout=30.0, **kwargs):
        return run_ranks(n, fn, *args, timeout=timeout, **kwargs)

    return run


@pytest.fixture
def rng():
    return np.random.default_rng(20181112)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
