import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats as sps

from levytree.errors import DomainError
from levytree.stats import (
    SampleSet,
    ecdf,
    kolmogorov_sf,
    ks_one_sample,
    ks_statistic,
    ks_two_sample,
    lemma41_check,
    moments,
)


def rayleigh_cdf(x):
    return -np.expm1(-np.asarray(x) ** 2 / 2)


def S(values, label="x"):
    return SampleSet(np.asarray(values, dtype=float), label)


def test_sampleset_validation():
    with pytest.raises(DomainError):
        S([1.0, np.nan])
    with pytest.raises(DomainError):
        S([1.0], "")


@pytest.mark.parametrize("x", [0.05, 0.3, 0.6, 0.99, 1.0, 1.36, 2.0, 4.0])
def test_kolmogorov_sf_matches_scipy(x):
    assert kolmogorov_sf(x) == pytest.approx(special.kolmogorov(x), abs=1e-12)


def test_one_sample_examples():
    assert ks_statistic([0.5], lambda x: np.clip(x, 0, 1)) == 0.5
    c = 0.3
    D = ks_statistic(np.full(60, c), rayleigh_cdf)
    assert D >= 1 - rayleigh_cdf(c) - 1e-15
    with pytest.raises(DomainError):
        ks_one_sample(S([0.5]), lambda x: x)


def test_one_sample_null_and_scipy():
    rng = np.random.default_rng(0)
    x = np.sqrt(-2 * np.log(rng.random(10_000)))
    rep = ks_one_sample(S(x), rayleigh_cdf)
    assert rep.D < 0.02
    ref = sps.kstest(x, rayleigh_cdf, method="asymp")
    assert rep.D == pytest.approx(ref.statistic, abs=1e-14)
    assert rep.p_approx == pytest.approx(ref.pvalue, abs=1e-6)


def test_two_sample_examples():
    rng = np.random.default_rng(1)
    a = rng.random(100)
    r = ks_two_sample(S(a), S(a, "y"))
    assert r.D == 0 and r.passed
    assert ks_two_sample(S(a), S(a + 2, "y")).D == 1.0
    b, c = rng.normal(size=(2, 10_000))
    assert ks_two_sample(S(b), S(c, "y")).D < 0.03
    d = rng.normal(size=313)
    ref = sps.ks_2samp(a, d, method="asymp")
    assert ks_two_sample(S(a), S(d, "y")).D == pytest.approx(ref.statistic, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_two_sample_invariant_under_monotone_map(seed):
    rng = np.random.default_rng(seed)
    a = rng.exponential(size=int(rng.integers(50, 200)))
    b = rng.exponential(1.3, size=int(rng.integers(50, 200)))
    assert ks_two_sample(S(a), S(b, "y")).D == ks_two_sample(S(a ** 3), S(b ** 3, "y")).D


def test_report_json_schema():
    rng = np.random.default_rng(2)
    rep = ks_two_sample(S(rng.random(60)), S(rng.random(70), "y"), max_D=0.5)
    d = rep.to_dict()
    assert set(d) == {"test", "D", "n", "m", "p_approx", "pass", "alpha"}
    assert 0 <= d["D"] <= 1 and 0 <= d["p_approx"] <= 1 and d["pass"] is True


def test_ecdf_properties():
    rng = np.random.default_rng(3)
    v = rng.normal(size=200)
    F = ecdf(v)
    grid = np.sort(np.concatenate((v, rng.normal(size=200) * 3)))
    vals = F(grid)
    assert np.all(np.diff(vals) >= 0)
    assert F(v.min() - 1) == 0 and F(v.max()) == 1
    # right-continuity at the jump points
    assert np.all(F(np.sort(v)) == np.arange(1, 201) / 200)


def test_moment_examples():
    assert moments(S(np.full(10, 1.5)), [2]) == [(2.25, 0.0)]
    assert moments(S([0.0, 2.0]), [1]) == [(1.0, 1.0)]
    rng = np.random.default_rng(4)
    x = np.sqrt(-2 * np.log(rng.random(10_000)))
    (m2, se), = moments(S(x), [2])
    assert abs(m2 - 2) <= 3 * se
    with pytest.raises(DomainError):
        moments(S([1.0]), [1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=30))
def test_moment_stderr_zero_iff_constant(xs):
    x = np.array(xs)
    (m, se), = moments(S(x), [1])
    assert (se == 0) == bool(np.all(x == x[0]))
    if se > 0:
        assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-6, abs=1e-9)


def test_lemma41_examples():
    lhs, rhs = lemma41_check([(1, 2)], 0)
    assert lhs == pytest.approx(1 - math.exp(-2), abs=1e-15) and rhs == pytest.approx(lhs, abs=1e-15)
    lhs, rhs = lemma41_check([(1, 0.3), (2, 0.7)], 0)
    assert lhs == pytest.approx(1 - math.exp(-1), abs=1e-15)
    assert rhs == pytest.approx((1 - math.exp(-0.3)) * math.exp(-0.7) + (1 - math.exp(-0.7)), abs=1e-15)
    assert lemma41_check([(1, 0.3), (2, 0.7)], 5) == (0.0, 0.0)
    with pytest.raises(DomainError):
        lemma41_check([(1, -0.3)], 0)
    with pytest.raises(DomainError):
        lemma41_check([(1, 0.3), (1, 0.2)], 0)


def test_lemma41_random_measures():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        k = int(rng.integers(1, 51))
        atoms = np.column_stack((rng.exponential(size=k), rng.exponential(size=k) * rng.choice([0.01, 1, 10])))
        lhs, rhs = lemma41_check(atoms, float(rng.uniform(0, 2)))
        assert abs(lhs - rhs) <= 1e-10
