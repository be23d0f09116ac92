import numpy as np
import pytest

from tamatch.core import TypeHistogram, vtype


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_types():
    """Four online vertices over u0..u3: {0,2}, {1,2} and twice {0,1,3}."""
    return TypeHistogram({vtype(0, 2): 1, vtype(1, 2): 1, vtype(0, 1, 3): 2}, 4)


@pytest.fixture
def disjoint_advice():
    """Advice with a support disjoint from ``small_types``: {0}, {2}, {3}, {1,3}."""
    return TypeHistogram({vtype(0): 1, vtype(2): 1, vtype(3): 1, vtype(1, 3): 1}, 4)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """``report(name, ok, detail)`` records one acceptance line for the terminal summary."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(name: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {name}  {detail}".rstrip()
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
