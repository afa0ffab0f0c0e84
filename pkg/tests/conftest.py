import numpy as np
import pytest

from fampack.graph import Graph

ACCEPTANCE_LINES: list[str] = []


def gnp(n: int, p: float, seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p])


def brute_max_packing(g: Graph, copies_edges: list[frozenset]) -> int:
    """Largest edge-disjoint subfamily, by exhaustive memoised search."""
    from functools import lru_cache

    items = sorted(copies_edges, key=sorted)

    @lru_cache(maxsize=None)
    def best(i: int, used: frozenset) -> int:
        if i == len(items):
            return 0
        skip = best(i + 1, used)
        if used.isdisjoint(items[i]):
            return max(skip, 1 + best(i + 1, used | items[i]))
        return skip

    return best(0, frozenset())


@pytest.fixture
def record():
    def _record(line: str):
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
