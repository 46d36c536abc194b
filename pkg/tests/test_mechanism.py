import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levytree.errors import DomainError, UnsupportedError
from levytree.mechanism import (
    AtomLevy,
    BROWNIAN,
    BranchingMechanism,
    MechanismAnalytics,
    StableLevy,
    bismut_laplace,
    brownian_canonical_tail,
    check_grey,
    eval_psi,
    g_eval,
    psi_derivatives,
    psi_inverse,
    rayleigh_moment,
    shift_mechanism,
    solve_v,
    tail_integral,
    z_moment,
)

QUAD = BranchingMechanism(beta=0.5)
STABLE = BranchingMechanism(levy=StableLevy(1.0, 1.5))
ATOMS = BranchingMechanism(alpha=0.3, beta=0.7, levy=AtomLevy(((0.5, 2.0), (3.0, 0.25))))
MIXED = BranchingMechanism(alpha=0.2, beta=0.1, levy=StableLevy(0.8, 1.3))


def test_eval_psi_examples():
    assert eval_psi(QUAD, 2.0) == 2.0
    assert eval_psi(STABLE, 4.0) == pytest.approx(8.0, rel=1e-15)
    for mech in (QUAD, STABLE, ATOMS, MIXED):
        assert eval_psi(mech, 0.0) == 0.0


def test_eval_psi_negative_lambda():
    with pytest.raises(DomainError):
        eval_psi(QUAD, -1.0)


def test_atoms_sum_exactly():
    lam = 1.7
    expected = 0.3 * lam + 0.7 * lam**2
    expected += 2.0 * (math.exp(-lam * 0.5) - 1 + lam * 0.5)
    expected += 0.25 * (math.exp(-lam * 3.0) - 1 + lam * 3.0)
    assert eval_psi(ATOMS, lam) == pytest.approx(expected, rel=1e-14)


def test_psi_derivative_examples():
    assert psi_derivatives(QUAD, 3.0) == (3.0, 1.0)
    d1, d2 = psi_derivatives(STABLE, 4.0)
    assert d1 == pytest.approx(3.0, rel=1e-15)
    # gamma*(gamma-1)*c0*lam**(gamma-2) = 0.75 * 4**-0.5
    assert d2 == pytest.approx(0.375, rel=1e-15)
    m = BranchingMechanism(alpha=2.0, beta=0.0, levy=AtomLevy(((1.0, 1.0),)))
    assert psi_derivatives(m, 0.0) == (2.0, 1.0)


def test_stable_second_derivative_singular_at_zero():
    with pytest.raises(DomainError):
        psi_derivatives(STABLE, 0.0)
    assert STABLE.dpsi(0.0) == 0.0


@pytest.mark.parametrize("mech", [QUAD, STABLE, ATOMS, MIXED])
@pytest.mark.parametrize("lam", [0.05, 0.7, 3.0, 20.0])
def test_derivatives_match_finite_differences(mech, lam):
    h = 1e-6
    fd1 = (eval_psi(mech, lam + h) - eval_psi(mech, lam - h)) / (2 * h)
    d1, d2 = psi_derivatives(mech, lam)
    fd2 = (psi_derivatives(mech, lam + h)[0] - psi_derivatives(mech, lam - h)[0]) / (2 * h)
    assert abs(d1 - fd1) <= 1e-5 * abs(d1)
    assert abs(d2 - fd2) <= 1e-5 * abs(d2)


mechanisms = st.one_of(
    st.builds(
        BranchingMechanism,
        alpha=st.floats(0, 3),
        beta=st.floats(0.01, 3),
    ),
    st.builds(
        lambda a, b, c0, g: BranchingMechanism(a, b, StableLevy(c0, g)),
        st.floats(0, 3), st.floats(0, 3), st.floats(0.1, 3), st.floats(1.05, 1.95),
    ),
    st.builds(
        lambda a, b, atoms: BranchingMechanism(a, b, AtomLevy(tuple(atoms))),
        st.floats(0, 3), st.floats(0, 3),
        st.lists(st.tuples(st.floats(0.01, 5), st.floats(0.01, 5)), min_size=1, max_size=4),
    ),
)


@settings(max_examples=1000, deadline=None)
@given(mechanisms, st.floats(0.001, 50), st.floats(0.001, 50))
def test_convex_and_increasing(mech, l1, l2):
    l1, l2 = min(l1, l2), max(l1, l2)
    assert eval_psi(mech, l1) <= eval_psi(mech, l2) + 1e-12
    assert psi_derivatives(mech, l1)[0] <= psi_derivatives(mech, l2)[0] + 1e-12


@settings(max_examples=300, deadline=None)
@given(mechanisms, st.floats(0.01, 10), st.floats(0, 10))
def test_shift_consistency(mech, q, lam):
    sh = shift_mechanism(mech, q)
    assert sh.psi(lam) == pytest.approx(eval_psi(mech, lam + q) - eval_psi(mech, q), abs=1e-12)
    assert sh.dpsi(0.0) == psi_derivatives(mech, q)[0]
    assert sh.psi(0.0) == 0.0


def test_shift_examples():
    assert shift_mechanism(QUAD, 1.0).psi(2.0) == 4.0
    assert shift_mechanism(STABLE, 1.0).psi(0.0) == 0.0
    assert shift_mechanism(STABLE, 1.0).psi(1.0) == pytest.approx(2**1.5 - 1, rel=1e-14)
    assert shift_mechanism(QUAD, 1.0).dpsi(0.0) > 0
    with pytest.raises(DomainError):
        shift_mechanism(QUAD, 0.0)


def test_check_grey():
    assert check_grey(QUAD)
    assert check_grey(STABLE)
    assert not check_grey(BranchingMechanism(alpha=1.0, beta=0.0, levy=AtomLevy(((1.0, 1.0),))))
    assert check_grey(ATOMS)


def test_grey_decision_agrees_with_quadrature():
    # partial integrals of 1/psi up to L: bounded for Grey mechanisms, growing like log L otherwise
    bad = BranchingMechanism(alpha=1.0, beta=0.0, levy=AtomLevy(((1.0, 1.0),)))
    partial = lambda m, L: float(mpmath.quad(lambda x: 1 / m.psi(float(x)), [1, 10, 100, L]))
    assert partial(bad, 1e6) - partial(bad, 1e3) > 1.0
    assert partial(ATOMS, 1e6) - partial(ATOMS, 1e3) < 2 / (0.7 * 1e3)


def _tail_oracle(mech, v):
    return float(mpmath.quad(lambda x: 1 / mech.psi(float(x)), [v, 10 * v, mpmath.inf]))


def test_solve_v_examples():
    assert solve_v(MechanismAnalytics(QUAD), 1.0) == 2.0
    assert solve_v(MechanismAnalytics(STABLE), 1.0) == pytest.approx(4.0, rel=1e-14)
    assert solve_v(QUAD, 2.0) == 1.0


@pytest.mark.parametrize("mech", [QUAD, STABLE, ATOMS, MIXED, BranchingMechanism(alpha=0.5, beta=2.0)])
@pytest.mark.parametrize("a", [0.1, 1.0, 5.0])
def test_solve_v_inverts_tail_integral(mech, a):
    an = MechanismAnalytics(mech, tol_root=1e-10)
    v = solve_v(an, a)
    assert abs(_tail_oracle(mech, v) - a) <= 1e-8 * a
    assert abs(tail_integral(an, v) - a) <= an.tol_root * a


def test_solve_v_errors():
    bad = BranchingMechanism(alpha=1.0, beta=0.0, levy=AtomLevy(((1.0, 1.0),)))
    with pytest.raises(UnsupportedError):
        solve_v(bad, 1.0)
    with pytest.raises(DomainError):
        solve_v(QUAD, 0.0)


def test_analytics_tolerance_range():
    with pytest.raises(DomainError):
        MechanismAnalytics(QUAD, tol_root=1e-3)


def test_psi_inverse_examples():
    assert psi_inverse(QUAD, 2.0) == 2.0
    assert psi_inverse(STABLE, 8.0) == pytest.approx(4.0, rel=1e-14)
    for m in (QUAD, STABLE, ATOMS):
        assert psi_inverse(m, 0.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(mechanisms, st.floats(1e-4, 1e4))
def test_psi_inverse_round_trip(mech, y):
    an = MechanismAnalytics(mech, tol_root=1e-10)
    lam = psi_inverse(an, y)
    assert abs(eval_psi(mech, lam) - y) <= an.tol_root * max(y, 1.0)


def test_g_examples():
    assert g_eval(QUAD, 2.0) == 2.0
    assert g_eval(QUAD, 0.5) == 1.0
    assert g_eval(STABLE, 8.0) == pytest.approx(3.0, rel=1e-14)


def test_bismut_laplace_examples():
    assert bismut_laplace(QUAD, eval_psi(QUAD, 1.0), 0.0) == 1.0
    assert bismut_laplace(QUAD, 2.0, 2.0) == 0.25
    assert bismut_laplace(STABLE, 8.0, 1.0) == pytest.approx(0.25, rel=1e-14)


@pytest.mark.parametrize("mech", [QUAD, STABLE, ATOMS, MIXED])
@pytest.mark.parametrize("q", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_bismut_laplace_matches_mass_moment(mech, q):
    val = bismut_laplace(mech, eval_psi(mech, q), 0.0) * psi_derivatives(mech, q)[0]
    assert abs(val - 1.0) <= 1e-8


def test_brownian_g_matches_canonical_mass_density():
    # N[sigma in ds] = s^{-3/2} ds / sqrt(2 pi) for psi = lam^2/2
    lam = 1.3
    with mpmath.workdps(30):
        integral = mpmath.quad(
            lambda s: -mpmath.expm1(-lam * s) * s**-1.5 / mpmath.sqrt(2 * mpmath.pi),
            [0, 0.01, 1, 10, mpmath.inf],
        )
    assert float(integral) == pytest.approx(g_eval(BROWNIAN, lam), rel=1e-10)


def test_z_moment_examples():
    assert z_moment(2.0, 0.5, 2) == pytest.approx(2.0, rel=1e-12)
    assert z_moment(2.0, 0.5, 1) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
    assert z_moment(2.0, 0.5, 1) == pytest.approx(2**0.5 * math.gamma(1.5), rel=1e-12)
    assert z_moment(2.0, 0.5, 4) == pytest.approx(8.0, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_z_moment_reduces_to_rayleigh(n):
    oracle = float(mpmath.quad(lambda x: x**n * x * mpmath.exp(-x * x / 2), [0, mpmath.inf]))
    assert abs(z_moment(2.0, 0.5, n) / oracle - 1) <= 1e-10
    assert abs(rayleigh_moment(n) / oracle - 1) <= 1e-10


def test_z_moment_domain():
    with pytest.raises(DomainError):
        z_moment(1.0, 0.5, 1)
    with pytest.raises(DomainError):
        z_moment(1.5, 0.5, 0)


def test_brownian_canonical_tail():
    assert brownian_canonical_tail(2 / math.pi) == pytest.approx(1.0, rel=1e-15)
    assert brownian_canonical_tail(0.02) == pytest.approx(5.641895835, rel=1e-9)
    assert brownian_canonical_tail(4 * 0.3) == pytest.approx(brownian_canonical_tail(0.3) / 2, rel=1e-15)
    # independent oracle: integrate the canonical mass density beyond eps
    eps = 0.07
    with mpmath.workdps(30):
        tail = mpmath.quad(lambda s: s**-1.5 / mpmath.sqrt(2 * mpmath.pi), [eps, 1, 100, mpmath.inf])
    assert brownian_canonical_tail(eps) == pytest.approx(float(tail), rel=1e-12)
    with pytest.raises(UnsupportedError):
        brownian_canonical_tail(0.1, STABLE)


def test_mechanism_validation():
    with pytest.raises(DomainError):
        BranchingMechanism(alpha=0.0, beta=0.0)
    with pytest.raises(DomainError):
        BranchingMechanism(alpha=-1.0, beta=1.0)
    with pytest.raises(DomainError):
        StableLevy(1.0, 2.0)


@pytest.mark.parametrize("mech", [QUAD, STABLE, ATOMS, MIXED, BranchingMechanism(beta=0.1 + 0.2)])
def test_config_round_trip(mech):
    import json

    text = json.dumps(mech.to_config())
    back = BranchingMechanism.from_config(json.loads(text))
    assert back == mech
    assert json.dumps(back.to_config()) == text
