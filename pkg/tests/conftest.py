import numpy as np
import pytest

from pseudotrue.design import SeedSpec
from pseudotrue.network import Network


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def star(leaves: int) -> Network:
    """Node 0 joined to nodes 1..leaves."""
    return Network.from_edges(leaves + 1, np.zeros(leaves, int), np.arange(1, leaves + 1))


def complete(n: int) -> Network:
    return Network.from_dense(np.ones((n, n)) - np.eye(n))


def empty(n: int) -> Network:
    return Network.from_dense(np.zeros((n, n)))


SEED = SeedSpec(2024, 0)


_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict(request):
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _VERDICTS[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
