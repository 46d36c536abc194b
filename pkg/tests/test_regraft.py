import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levytree.errors import DomainError
from levytree.record import assign_marks, class_subtrees, decompose_classes, marked_from_times
from levytree.regraft import (
    bismut_summary,
    branch_end,
    build_regraft_tree,
    regraft_summary,
)
from levytree.tree import build_tree, distance, mrca, spine_decomposition

from conftest import random_tree

INF = math.inf


def regraft_of(marked):
    d = decompose_classes(marked)
    return d, build_regraft_tree(d, class_subtrees(marked, d))


def test_single_class_branch():
    t = build_tree([-1, 0], [0, 1.0], [0, 0.5])
    d, r = regraft_of(marked_from_times(t, [INF, 3.0], [INF, INF]))
    # branch of length t * m with the class at position 0
    assert d.Theta == 1.5
    assert r.total_mass == 0.5
    assert r.total_length == 1.5 + 1.0
    assert d.classes[0].graft_pos == 0.0
    assert r.children(0).size == 2


def test_empty_decomposition_is_bare_root():
    t = build_tree([-1, 0], [0, 1.0], [0, 0.0])
    m = marked_from_times(t, [INF, INF], [INF, INF])
    d, r = regraft_of(m)
    assert d.classes == () and r.n == 1


def test_two_classes_prefix_formula():
    two = build_tree([-1, 0, 0], [0, 1, 1], [0, 0.25, 0.75])
    m = marked_from_times(two, [INF, 1.0, 3.0], [INF] * 3)
    d, r = regraft_of(m)
    late, early = d.classes
    assert (late.theta, late.graft_pos) == (3.0, 0.0)
    assert early.graft_pos == 0.75 * (3.0 - 1.0)
    assert d.Theta == 0.25 * 1 + 0.75 * 3
    end = branch_end(r, d)
    assert distance(r, 0, end) == d.Theta


def test_misaligned_inputs():
    two = build_tree([-1, 0, 0], [0, 1, 1], [0, 0.25, 0.75])
    m = marked_from_times(two, [INF, 1.0, 3.0], [INF] * 3)
    d = decompose_classes(m)
    subs = class_subtrees(m, d)
    with pytest.raises(DomainError):
        build_regraft_tree(d, subs[:1])
    with pytest.raises(DomainError):
        build_regraft_tree(d, subs[::-1])


def test_summary_counts():
    t = build_tree([-1, 0], [0, 1.0], [0, 0.5])
    d = decompose_classes(marked_from_times(t, [INF, 3.0], [INF, INF]))
    s = regraft_summary(d, [0.6, 0.4, 0.1])
    assert s.counts == (0, 1, 1)
    assert s.small_mass == (0.5, 0.0, 0.0)
    with pytest.raises(DomainError):
        regraft_summary(d, [0.0])


def test_bismut_summary_examples(cherry):
    edge = build_tree([-1, 0], [0, 2.0], [0, 1.0])
    s = bismut_summary(edge, 1, [0.5])
    assert (s.branch_len, s.n_atoms, s.counts) == (2.0, 0, (0,))
    s = bismut_summary(cherry, 2, [2.0, 1.0, 0.5])
    assert s.positions.tolist() == [1.0] and s.masses.tolist() == [1.0]
    assert s.counts == (0, 1, 1)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_regraft_bookkeeping_and_round_trip(seed):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, int(rng.integers(2, 40)))
    m = assign_marks(t, 0.5, rng)
    d, r = regraft_of(m)
    subs = class_subtrees(m, d)
    assert r.total_mass == pytest.approx(t.total_mass, abs=1e-12)
    assert r.total_length == pytest.approx(d.Theta + math.fsum(s.total_length for s in subs), abs=1e-12)
    end = branch_end(r, d)
    assert r.heights[end] == pytest.approx(d.Theta, abs=1e-12)
    # cutting along the branch gives back the grafted atoms, grouped by position
    sd = spine_decomposition(r, end, require_leaf=False)
    expect = defaultdict(float)
    for c in d.classes:
        expect[c.graft_pos] += c.sigma
    got = [(a.h, a.mass) for a in sd.atoms]
    want = sorted((p, w) for p, w in expect.items() if w > 0)
    assert len(got) == len(want)
    for (h, w), (p, v) in zip(got, want):
        assert h == pytest.approx(p, abs=1e-12)
        assert w == pytest.approx(v, abs=1e-12)
    # later-removed classes sit closer to the branch root
    assert np.all(np.diff(d.graft_positions) >= 0)


def test_regraft_metric_axioms():
    rng = np.random.default_rng(3)
    for _ in range(50):
        t = random_tree(rng, int(rng.integers(2, 30)))
        _, r = regraft_of(assign_marks(t, 0.5, rng))
        h = r.heights
        for a, b, c in rng.integers(0, r.n, size=(50, 3)):
            dab = distance(r, a, b)
            assert dab == distance(r, b, a)
            assert dab <= distance(r, a, c) + distance(r, c, b) + 1e-12
            assert dab == pytest.approx(h[a] + h[b] - 2 * h[mrca(r, a, b)], abs=1e-12)
