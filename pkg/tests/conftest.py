import itertools

import numpy as np
import pytest


def enumerate_optimum(u, loads):
    """Plain-loop exhaustive optimum over every user picking one of 0..N."""
    u = np.asarray(u, dtype=float)
    m, n1 = u.shape
    best = -np.inf
    for a in itertools.product(range(n1), repeat=m):
        counts = [sum(1 for x in a if x == j) for j in range(1, n1)]
        if all(c <= b for c, b in zip(counts, loads)):
            best = max(best, sum(u[i, a[i]] for i in range(m)))
    return best


def random_instance(rng, max_users=8, max_bs=3, max_load=2, hi=20):
    m = int(rng.integers(2, max_users + 1))
    n = int(rng.integers(1, max_bs + 1))
    u = rng.integers(0, hi + 1, size=(m, n + 1)).astype(float)
    b = rng.integers(0, max_load + 1, size=n)
    return u, b


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# (criterion, passed, detail) lines collected by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
