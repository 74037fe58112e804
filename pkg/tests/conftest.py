import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fuzzcor import FuzzyNumber, FuzzyPartition

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_fuzzcor_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="fuzzcor")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ruspini_bank(edges, width=0.5):
    """Trapezoids meeting at ``edges`` with mirror legs of the given half-width."""
    edges = list(edges)
    lo, hi = edges[0], edges[-1]
    cuts = edges[1:-1]
    out = []
    for i in range(len(cuts) + 1):
        left = lo if i == 0 else cuts[i - 1]
        right = hi if i == len(cuts) else cuts[i]
        xl = left if i == 0 else left - width
        c1 = left if i == 0 else left + width
        c2 = right if i == len(cuts) else right - width
        xu = right if i == len(cuts) else right + width
        out.append(FuzzyNumber(xl, c1, c2, xu))
    return FuzzyPartition(out)


def crisp_bank(edges):
    """Rectangles between consecutive edges."""
    return FuzzyPartition([FuzzyNumber.rectangular(a, b) for a, b in zip(edges[:-1], edges[1:])])


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
