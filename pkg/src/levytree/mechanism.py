"""Branching mechanisms and their closed-form analytics.

A branching mechanism is

    psi(lam) = alpha*lam + beta*lam**2 + int (exp(-lam*r) - 1 + lam*r) pi(dr)

with three supported Levy parts: none, a stable part ``c0 * lam**gamma`` with
``gamma in (1, 2)``, or a finite sum of atoms ``(r_k, mass_k)``.  The
quadratic (Brownian) case is encoded through ``beta`` with no Levy part, so
a "stable" mechanism with gamma = 2 never appears.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .errors import DomainError, UnsupportedError

__all__ = [
    "StableLevy",
    "AtomLevy",
    "BranchingMechanism",
    "ShiftedMechanism",
    "MechanismAnalytics",
    "eval_psi",
    "psi_derivatives",
    "shift_mechanism",
    "check_grey",
    "tail_integral",
    "solve_v",
    "psi_inverse",
    "g_eval",
    "bismut_laplace",
    "z_moment",
    "brownian_canonical_tail",
    "rayleigh_moment",
    "BROWNIAN",
]


@dataclass(frozen=True)
class StableLevy:
    c0: float
    gamma: float

    def __post_init__(self):
        if not self.c0 > 0:
            raise DomainError(f"stable c0 must be positive, got {self.c0}")
        if not 1.0 < self.gamma < 2.0:
            raise DomainError(
                f"stable gamma must lie in (1, 2), got {self.gamma}; "
                "use beta for the quadratic case"
            )


@dataclass(frozen=True)
class AtomLevy:
    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(r), float(m)) for r, m in self.atoms)
        if not atoms:
            raise DomainError("atom Levy measure needs at least one atom")
        for k, (r, m) in enumerate(atoms):
            if not (r > 0 and m > 0):
                raise DomainError(f"atom {k} = ({r}, {m}) must have r > 0 and mass > 0")
        object.__setattr__(self, "atoms", atoms)

    @property
    def r(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def mass(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])


LevySpec = Union[None, StableLevy, AtomLevy]


@dataclass(frozen=True)
class BranchingMechanism:
    alpha: float = 0.0
    beta: float = 0.0
    levy: LevySpec = None

    def __post_init__(self):
        if not self.alpha >= 0:
            raise DomainError(f"alpha must be non-negative, got {self.alpha}")
        if not self.beta >= 0:
            raise DomainError(f"beta must be non-negative, got {self.beta}")
        if self.levy is None and not self.beta > 0:
            raise DomainError("a mechanism without Levy part needs beta > 0")

    # -- evaluation -------------------------------------------------------
    def psi(self, lam: float) -> float:
        lam = _check_lambda(lam)
        val = self.alpha * lam + self.beta * lam * lam
        if isinstance(self.levy, StableLevy):
            val += self.levy.c0 * lam ** self.levy.gamma
        elif isinstance(self.levy, AtomLevy):
            x = lam * self.levy.r
            # exp(-x) - 1 + x without cancellation
            val += float(np.sum(self.levy.mass * (np.expm1(-x) + x)))
        return float(val)

    def derivatives(self, lam: float) -> tuple[float, float]:
        lam = _check_lambda(lam)
        d1 = self.alpha + 2.0 * self.beta * lam
        d2 = 2.0 * self.beta
        if isinstance(self.levy, StableLevy):
            c0, g = self.levy.c0, self.levy.gamma
            if lam == 0.0:
                raise DomainError("second derivative of a stable mechanism is singular at 0")
            d1 += g * c0 * lam ** (g - 1.0)
            d2 += g * (g - 1.0) * c0 * lam ** (g - 2.0)
        elif isinstance(self.levy, AtomLevy):
            r, m = self.levy.r, self.levy.mass
            d1 += float(np.sum(-m * r * np.expm1(-lam * r)))
            d2 += float(np.sum(m * r * r * np.exp(-lam * r)))
        return float(d1), float(d2)

    def dpsi(self, lam: float) -> float:
        """First derivative alone; finite at 0 for every spec."""
        lam = _check_lambda(lam)
        if isinstance(self.levy, StableLevy) and lam == 0.0:
            return float(self.alpha)
        return self.derivatives(lam)[0]

    # -- structure ----------------------------------------------------------
    @property
    def is_pure_quadratic(self) -> bool:
        return self.levy is None

    @property
    def is_pure_stable(self) -> bool:
        return isinstance(self.levy, StableLevy) and self.alpha == 0 and self.beta == 0

    @property
    def is_brownian(self) -> bool:
        return self.levy is None and self.alpha == 0 and self.beta == 0.5

    def to_config(self) -> dict:
        if self.levy is None:
            levy = "none"
        elif isinstance(self.levy, StableLevy):
            levy = {"stable": {"c0": self.levy.c0, "gamma": self.levy.gamma}}
        else:
            levy = {"atoms": [[r, m] for r, m in self.levy.atoms]}
        return {"alpha": self.alpha, "beta": self.beta, "levy": levy}

    @classmethod
    def from_config(cls, cfg: dict) -> "BranchingMechanism":
        levy_cfg = cfg.get("levy", "none")
        if levy_cfg in (None, "none"):
            levy = None
        elif isinstance(levy_cfg, dict) and "stable" in levy_cfg:
            s = levy_cfg["stable"]
            levy = StableLevy(float(s["c0"]), float(s["gamma"]))
        elif isinstance(levy_cfg, dict) and "atoms" in levy_cfg:
            levy = AtomLevy(tuple((r, m) for r, m in levy_cfg["atoms"]))
        else:
            raise DomainError(f"unrecognised levy spec {levy_cfg!r}")
        return cls(float(cfg.get("alpha", 0.0)), float(cfg.get("beta", 0.0)), levy)


BROWNIAN = BranchingMechanism(alpha=0.0, beta=0.5)


def _check_lambda(lam) -> float:
    lam = float(lam)
    if not lam >= 0:
        raise DomainError(f"lambda must be non-negative, got {lam}")
    return lam


def eval_psi(mech: BranchingMechanism, lam: float) -> float:
    return mech.psi(lam)


def psi_derivatives(mech: BranchingMechanism, lam: float) -> tuple[float, float]:
    """Return ``(psi'(lam), psi''(lam))`` from the analytic formulas."""
    return mech.derivatives(lam)


@dataclass(frozen=True)
class ShiftedMechanism:
    """``psi_q(lam) = psi(lam + q) - psi(q)``, the mechanism of the tree pruned at rate q."""

    base: BranchingMechanism
    q: float

    def psi(self, lam: float) -> float:
        lam = _check_lambda(lam)
        if lam == 0.0:
            return 0.0
        return self.base.psi(lam + self.q) - self.base.psi(self.q)

    def derivatives(self, lam: float) -> tuple[float, float]:
        return self.base.derivatives(_check_lambda(lam) + self.q)

    def dpsi(self, lam: float) -> float:
        return self.base.dpsi(_check_lambda(lam) + self.q)


def shift_mechanism(mech: BranchingMechanism, q: float) -> ShiftedMechanism:
    if not q > 0:
        raise DomainError(f"shift q must be positive, got {q}")
    return ShiftedMechanism(mech, float(q))


def check_grey(mech: BranchingMechanism) -> bool:
    """Whether ``int^inf dlam / psi(lam)`` is finite.

    Quadratic and stable parts grow faster than ``lam**1``, so the integral
    converges.  A finite atom measure adds at most ``lam * sum(r*m)``, so
    with ``beta = 0`` psi grows linearly and the integral diverges.
    """
    if mech.beta > 0 or isinstance(mech.levy, StableLevy):
        return True
    return False


@dataclass(frozen=True)
class MechanismAnalytics:
    mech: BranchingMechanism
    tol_root: float = 1e-12
    tol_quad: float = 1e-12

    def __post_init__(self):
        for name in ("tol_root", "tol_quad"):
            t = getattr(self, name)
            if not 0 < t <= 1e-4:
                raise DomainError(f"{name} must lie in (0, 1e-4], got {t}")


def _as_analytics(a) -> MechanismAnalytics:
    if isinstance(a, MechanismAnalytics):
        return a
    return MechanismAnalytics(a)


def tail_integral(analytics, v: float) -> float:
    """``int_v^inf dlam / psi(lam)`` for ``v > 0``."""
    an = _as_analytics(analytics)
    mech = an.mech
    if not v > 0:
        raise DomainError(f"tail integral needs v > 0, got {v}")
    if not check_grey(mech):
        return math.inf
    if mech.levy is None:
        if mech.alpha == 0:
            return 1.0 / (mech.beta * v)
        # 1/(alpha lam + beta lam^2) has antiderivative log(lam/(alpha+beta lam))/alpha
        return math.log1p(mech.alpha / (mech.beta * v)) / mech.alpha
    if mech.is_pure_stable:
        c0, g = mech.levy.c0, mech.levy.gamma
        return v ** (1.0 - g) / (c0 * (g - 1.0))
    # with lam = t**(-1/(k-1)) the tail becomes a finite integral of the
    # bounded function lam**k / psi(lam); k is the growth order of psi
    k = mech.levy.gamma if isinstance(mech.levy, StableLevy) else 2.0
    if k == 2.0:
        at_inf = 1.0 / mech.beta
    elif mech.beta == 0:
        at_inf = 1.0 / mech.levy.c0
    else:
        at_inf = 0.0

    def integrand(t):
        if t == 0.0:
            return at_inf
        lam = t ** (-1.0 / (k - 1.0))
        if not math.isfinite(lam) or lam > 1e150:
            return at_inf
        return 1.0 / (mech.psi(lam) / lam ** k)

    upper = v ** (1.0 - k)
    val, _ = integrate.quad(integrand, 0.0, upper, epsabs=an.tol_quad * 1e-2,
                            epsrel=1e-13, limit=200)
    return val / (k - 1.0)


def _increasing_bracket(f, target: float, tol: float) -> tuple[float, float]:
    """Grow ``[lo, hi]`` from ``[tol, 1]`` until ``f(lo) <= target <= f(hi)`` for increasing f."""
    lo, hi = tol, 1.0
    for _ in range(2000):
        if f(hi) >= target:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise UnsupportedError("could not bracket root")
    while f(lo) > target:
        lo /= 2.0
        if lo < 1e-300:
            raise UnsupportedError("could not bracket root near 0")
    return lo, hi


def solve_v(analytics, a: float) -> float:
    """Solve ``int_{v(a)}^inf dlam/psi(lam) = a`` for ``v(a)``; ``N[H_max > a] = v(a)``."""
    an = _as_analytics(analytics)
    mech = an.mech
    if not a > 0:
        raise DomainError(f"v(a) needs a > 0, got {a}")
    if not check_grey(mech):
        raise UnsupportedError("Grey condition fails; v(a) is not defined")
    if mech.levy is None:
        if mech.alpha == 0:
            return 1.0 / (mech.beta * a)
        return mech.alpha / (mech.beta * math.expm1(mech.alpha * a))
    if mech.is_pure_stable:
        c0, g = mech.levy.c0, mech.levy.gamma
        return (c0 * (g - 1.0) * a) ** (-1.0 / (g - 1.0))
    # the tail integral is decreasing in v; negate to reuse the increasing bracket
    f = lambda v: -tail_integral(an, v)
    lo, hi = _increasing_bracket(f, -a, an.tol_root)
    return optimize.brentq(lambda v: f(v) + a, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)


def psi_inverse(analytics, y: float) -> float:
    an = _as_analytics(analytics)
    mech = an.mech
    y = float(y)
    if not y >= 0:
        raise DomainError(f"psi_inverse needs y >= 0, got {y}")
    if y == 0.0:
        return 0.0
    if mech.levy is None:
        # stable root of beta lam^2 + alpha lam - y = 0
        return 2.0 * y / (mech.alpha + math.sqrt(mech.alpha ** 2 + 4.0 * mech.beta * y))
    if mech.is_pure_stable:
        return (y / mech.levy.c0) ** (1.0 / mech.levy.gamma)
    lo, hi = _increasing_bracket(mech.psi, y, an.tol_root)
    return optimize.brentq(lambda lam: mech.psi(lam) - y, lo, hi, xtol=1e-300,
                           rtol=4 * np.finfo(float).eps)


def g_eval(analytics, lam: float) -> float:
    """``psi'(0) + bold-N[1 - exp(-lam*sigma)]``, which equals ``psi'(psi^{-1}(lam))``."""
    an = _as_analytics(analytics)
    if not lam > 0:
        raise DomainError(f"g needs lambda > 0, got {lam}")
    return an.mech.dpsi(psi_inverse(an, lam))


def bismut_laplace(analytics, lam: float, rho: float) -> float:
    """``N[sigma * exp(-lam*sigma - rho*H)] = 1 / (rho + g(lam))``."""
    if not rho >= 0:
        raise DomainError(f"rho must be non-negative, got {rho}")
    return 1.0 / (rho + g_eval(analytics, lam))


def z_moment(gamma: float, c0: float, n: int) -> float:
    """n-th moment of the height of a mass-uniform leaf in the sigma = 1 stable tree."""
    if not 1.0 < gamma <= 2.0:
        raise DomainError(f"gamma must lie in (1, 2], got {gamma}")
    if not c0 > 0:
        raise DomainError(f"c0 must be positive, got {c0}")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    a = (gamma - 1.0) / gamma
    log_val = (
        gammaln(a) + gammaln(n + 1.0) - gammaln(a * (n + 1.0))
        - (n / gamma) * math.log(c0) - n * math.log(gamma)
    )
    return math.exp(log_val)


def rayleigh_moment(n: int) -> float:
    """``E[R**n] = 2**(n/2) * Gamma(1 + n/2)`` for the standard Rayleigh law."""
    return math.exp(0.5 * n * math.log(2.0) + gammaln(1.0 + 0.5 * n))


def brownian_canonical_tail(epsilon: float, mech: BranchingMechanism = BROWNIAN) -> float:
    """``N[sigma > eps]`` for ``psi(lam) = lam**2 / 2``, i.e. ``sqrt(2 / (pi * eps))``."""
    if not mech.is_brownian:
        raise UnsupportedError("closed-form mass tail is only available for psi = lam^2/2")
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    return math.sqrt(2.0 / (math.pi * epsilon))
