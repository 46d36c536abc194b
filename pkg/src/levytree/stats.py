"""Goodness-of-fit tests, moment estimates and a point-measure identity check."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "SampleSet",
    "KSReport",
    "MIN_KS_SAMPLES",
    "kolmogorov_sf",
    "ecdf",
    "ks_statistic",
    "ks_two_sample_statistic",
    "ks_one_sample",
    "ks_two_sample",
    "moments",
    "lemma41_check",
]

MIN_KS_SAMPLES = 50
_SERIES_TERMS = 100


@dataclass(frozen=True)
class SampleSet:
    values: np.ndarray
    label: str
    seed_info: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise DomainError(f"sample {self.label!r} must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise DomainError(f"sample {self.label!r} contains non-finite values")
        if not self.label:
            raise DomainError("sample label must be non-empty")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class KSReport:
    test: str
    D: float
    n: int
    m: Optional[int]
    p_approx: float
    alpha: float
    passed: bool

    def to_dict(self) -> dict:
        return {"test": self.test, "D": self.D, "n": self.n, "m": self.m,
                "p_approx": self.p_approx, "pass": self.passed, "alpha": self.alpha}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def kolmogorov_sf(x: float) -> float:
    """``P(K > x)`` for the Kolmogorov distribution, from a 100-term series.

    For small ``x`` the alternating series converges too slowly, so the
    theta-function form of the CDF is used there instead.
    """
    if x <= 0:
        return 1.0
    k = np.arange(1, _SERIES_TERMS + 1, dtype=float)
    if x < 1.0:
        odd = 2.0 * k - 1.0
        cdf = math.sqrt(2.0 * math.pi) / x * float(np.sum(np.exp(-(odd * odd) * math.pi ** 2 / (8.0 * x * x))))
        return float(min(1.0, max(0.0, 1.0 - cdf)))
    signs = np.where(k % 2 == 1, 1.0, -1.0)
    sf = 2.0 * float(np.sum(signs * np.exp(-2.0 * k * k * x * x)))
    return float(min(1.0, max(0.0, sf)))


def ecdf(values) -> Callable[[np.ndarray], np.ndarray]:
    """Right-continuous empirical CDF."""
    s = np.sort(np.asarray(values, dtype=float))

    def F(x):
        return np.searchsorted(s, np.asarray(x, dtype=float), side="right") / s.size

    return F


def ks_statistic(values, cdf: Callable) -> float:
    """``sup |F_n - F|`` from the sorted-sample formula (no minimum sample size)."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    if n == 0:
        raise DomainError("empty sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n), 0.0))


def ks_two_sample_statistic(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise DomainError("empty sample")
    grid = np.concatenate((a, b))
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def _need(s: SampleSet, k: int = MIN_KS_SAMPLES):
    if len(s) < k:
        raise DomainError(f"sample {s.label!r} has {len(s)} values, need at least {k}")


def _verdict(D, p, alpha, max_D):
    return bool(D <= max_D) if max_D is not None else bool(p >= alpha)


def ks_one_sample(samples: SampleSet, cdf: Callable, *, alpha: float = 0.05,
                  max_D: Optional[float] = None, name: str = "ks_one_sample") -> KSReport:
    """One-sample KS test; passes on ``p >= alpha``, or on ``D <= max_D`` when given."""
    _need(samples)
    n = len(samples)
    D = ks_statistic(samples.values, cdf)
    p = kolmogorov_sf(math.sqrt(n) * D)
    return KSReport(name, D, n, None, p, alpha, _verdict(D, p, alpha, max_D))


def ks_two_sample(a: SampleSet, b: SampleSet, *, alpha: float = 0.05,
                  max_D: Optional[float] = None, name: str = "ks_two_sample") -> KSReport:
    _need(a)
    _need(b)
    n, m = len(a), len(b)
    D = ks_two_sample_statistic(a.values, b.values)
    p = kolmogorov_sf(math.sqrt(n * m / (n + m)) * D)
    return KSReport(name, D, n, m, p, alpha, _verdict(D, p, alpha, max_D))


def moments(samples: SampleSet, orders: Sequence[int]) -> list[tuple[float, float]]:
    """Plug-in raw moments with jackknife standard errors."""
    if len(samples) < 2:
        raise DomainError("moments need at least two samples")
    n = len(samples)
    out = []
    for k in orders:
        y = samples.values ** k
        est = float(np.mean(y))
        if np.all(y == y[0]):
            out.append((float(y[0]), 0.0))
            continue
        # the jackknife error is shift invariant and scales linearly; normalising avoids underflow
        scale = float(np.max(np.abs(y - y[0])))
        z = (y - y[0]) / scale
        loo = (np.sum(z) - z) / (n - 1)
        se = scale * math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
        out.append((est, se))
    return out


def lemma41_check(atoms, r: float) -> tuple[float, float]:
    """Both sides of the telescoping identity for a finite point measure.

    ``lhs = 1 - exp(-sum_{r_j >= r} x_j)`` and
    ``rhs = sum_{r_j >= r} (1 - exp(-x_j)) exp(-sum_{r_l > r_j} x_l)``.
    """
    a = np.asarray(atoms, dtype=float).reshape(-1, 2)
    if r < 0 or np.any(a < 0) or not np.all(np.isfinite(a)):
        raise DomainError("atoms and level must be finite and non-negative")
    a = a[a[:, 0] >= r]
    if np.unique(a[:, 0]).size != a.shape[0]:
        raise DomainError("atom locations must be distinct")
    a = a[np.argsort(-a[:, 0])]
    x = a[:, 1]
    above = np.concatenate(([0.0], np.cumsum(x)[:-1]))
    lhs = -math.expm1(-math.fsum(x))
    rhs = math.fsum(-np.expm1(-x) * np.exp(-above))
    return lhs, rhs
