import numpy as np
import pytest

from levytree.tree import build_tree


def random_tree(rng, n, *, shuffle=True, leaf_mass_only=False):
    """Random recursive tree with random positive lengths and masses, labels shuffled."""
    parent = np.full(n, -1, dtype=np.int64)
    for v in range(1, n):
        parent[v] = rng.integers(0, v)
    edge_len = rng.uniform(0.1, 2.0, size=n)
    edge_len[0] = 0.0
    mass = rng.uniform(0.0, 1.0, size=n)
    mass[0] = 0.0
    if leaf_mass_only:
        has_child = np.zeros(n, dtype=bool)
        has_child[parent[1:]] = True
        mass[has_child] = 0.0
    if shuffle:
        perm = rng.permutation(n)
        inv = np.empty(n, dtype=np.int64)
        inv[perm] = np.arange(n)
        new_parent = np.full(n, -1, dtype=np.int64)
        new_parent[inv[1:]] = inv[parent[1:]]
        new_len = np.empty(n)
        new_len[inv] = edge_len
        new_mass = np.empty(n)
        new_mass[inv] = mass
        parent, edge_len, mass = new_parent, new_len, new_mass
    return build_tree(parent, edge_len, mass)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cherry():
    # root 0 -> v 1 -> leaves 2, 3; unit lengths and unit leaf masses
    return build_tree([-1, 0, 1, 1], [0, 1, 1, 1], [0, 0, 1, 1])


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
