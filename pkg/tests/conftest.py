import numpy as np
import pytest
from hypothesis import strategies as st

from pairperm import PartiallyPairedSample

# 3 complete pairs, 2 + 2 unpaired values; used across modules
FIXTURE_COMPLETE = [(1.2, 0.4), (2.5, 2.9), (3.1, 1.7)]
FIXTURE_FIRST = [0.3, 2.2]
FIXTURE_SECOND = [1.4, 3.6]


@pytest.fixture
def fixture_sample():
    return PartiallyPairedSample(FIXTURE_COMPLETE, FIXTURE_FIRST, FIXTURE_SECOND)


@pytest.fixture
def basic_sample():
    return PartiallyPairedSample([(1, 0), (2, 0), (3, 0)], [0, 2], [1, 3])


def random_sample(rng, n1, n2, n3, shift=0.0):
    return PartiallyPairedSample(
        rng.normal(size=(n1, 2)), rng.normal(size=n2) + shift, rng.normal(size=n3)
    )


finite = st.floats(min_value=-100, max_value=100, allow_nan=False, allow_infinity=False)


@st.composite
def samples(draw, min_n1=2, min_n23=2, max_size=8):
    n1 = draw(st.integers(min_n1, max_size))
    n2 = draw(st.integers(min_n23, max_size))
    n3 = draw(st.integers(min_n23, max_size))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return PartiallyPairedSample(
        rng.normal(size=(n1, 2)) * 3, rng.normal(size=n2) * 2, rng.normal(size=n3)
    )


# ---------------------------------------------------------------------------
# acceptance reporting

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(criterion, passed, detail):
        line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
