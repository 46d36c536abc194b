"""Critical Galton-Watson trees conditioned on their total progeny.

Trees are sampled by drawing ``n`` i.i.d. offspring counts until they sum to
``n - 1`` and rotating the sequence with the cycle lemma, so that its
Lukasiewicz path stays non-negative until the last step.  The result is a
plane tree in depth-first (preorder) order: ``parent[v] < v``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import stats

from .errors import CalibrationError, DomainError, UnsupportedError
from .tree import WTree, build_tree

__all__ = [
    "OffspringLaw",
    "ScalingPlan",
    "Calibration",
    "sample_offspring_sequence",
    "cycle_lemma_rotation",
    "lukasiewicz_path",
    "parent_from_offspring",
    "offspring_from_parent",
    "sample_conditioned_tree",
    "total_progeny_check",
    "rescale",
    "rescaled_length",
    "calibrate_edge_scale",
    "edge_scale_from_heights",
    "pilot_height",
    "RAYLEIGH_MEAN",
]

RAYLEIGH_MEAN = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class OffspringLaw:
    """Critical offspring distribution.

    ``kind`` is ``"poisson"`` (mean 1), ``"geometric"`` (``P(k) = 2**-(k+1)``)
    or ``"stable_tail"``: ``p_k`` proportional to ``k**(-1-gamma)`` on
    ``2..n_max``, ``p_1 = 0`` and ``p_0`` chosen so the mean is exactly 1.
    """

    kind: str
    gamma: Optional[float] = None
    n_max: int = 10**6

    def __post_init__(self):
        if self.kind not in ("poisson", "geometric", "stable_tail"):
            raise DomainError(f"unknown offspring law {self.kind!r}")
        if self.kind == "stable_tail":
            if self.gamma is None or not 1.0 < self.gamma < 2.0:
                raise DomainError(f"stable_tail needs gamma in (1, 2), got {self.gamma}")
            if self.n_max < 2:
                raise DomainError("stable_tail truncation must be at least 2")

    @cached_property
    def _stable_table(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.arange(2, self.n_max + 1, dtype=float)
        w = k ** (-1.0 - self.gamma)
        w /= w.sum()
        mean_big = float(np.dot(k, w))
        p = np.zeros(self.n_max + 1)
        p[2:] = w / mean_big
        p[0] = 1.0 - p[2:].sum()
        return p, np.cumsum(p)

    def pmf(self, k) -> np.ndarray:
        k = np.asarray(k)
        if self.kind == "poisson":
            return stats.poisson.pmf(k, 1.0)
        if self.kind == "geometric":
            return np.where(k >= 0, 0.5 ** (k + 1.0), 0.0)
        p, _ = self._stable_table
        out = np.zeros(k.shape)
        ok = (k >= 0) & (k <= self.n_max)
        out[ok] = p[k[ok]]
        return out

    @property
    def mean(self) -> float:
        if self.kind == "stable_tail":
            p, _ = self._stable_table
            return float(np.dot(np.arange(p.size), p))
        return 1.0

    @property
    def variance(self) -> float:
        if self.kind == "poisson":
            return 1.0
        if self.kind == "geometric":
            return 2.0
        return math.inf

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "poisson":
            return rng.poisson(1.0, size=size)
        if self.kind == "geometric":
            return rng.geometric(0.5, size=size) - 1
        _, cdf = self._stable_table
        u = rng.random(size=size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), self.n_max)

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        if self.kind == "stable_tail":
            cfg.update(gamma=self.gamma, n_max=self.n_max)
        return cfg

    @classmethod
    def from_config(cls, cfg) -> "OffspringLaw":
        if isinstance(cfg, str):
            return cls(cfg)
        return cls(cfg["kind"], cfg.get("gamma"), int(cfg.get("n_max", 10**6)))


def lukasiewicz_path(offspring) -> np.ndarray:
    """``x_0 = 0, x_{k+1} = x_k + xi_k - 1``; length ``n + 1``."""
    xi = np.asarray(offspring, dtype=np.int64)
    x = np.zeros(xi.size + 1, dtype=np.int64)
    np.cumsum(xi - 1, out=x[1:])
    return x


def cycle_lemma_rotation(offspring) -> np.ndarray:
    """Rotate a sequence summing to ``n - 1`` into the unique valid preorder word."""
    xi = np.asarray(offspring, dtype=np.int64)
    if xi.sum() != xi.size - 1:
        raise DomainError(f"offspring sum {xi.sum()} must equal n - 1 = {xi.size - 1}")
    x = lukasiewicz_path(xi)[1:]
    # start right after the first time the walk reaches its overall minimum
    k = int(np.argmin(x))
    return np.roll(xi, -(k + 1))


def parent_from_offspring(offspring) -> np.ndarray:
    """Parent array of the plane tree with the given preorder offspring counts."""
    xi = np.asarray(offspring, dtype=np.int64).tolist()
    n = len(xi)
    parent = [-1] * n
    stack = []  # (vertex, remaining child slots)
    for v in range(n):
        if stack:
            p = stack[-1]
            parent[v] = p[0]
            p[1] -= 1
            if p[1] == 0:
                stack.pop()
        elif v > 0:
            raise DomainError("offspring sequence is not a valid Lukasiewicz word")
        if xi[v] > 0:
            stack.append([v, xi[v]])
    if stack:
        raise DomainError("offspring sequence is not a valid Lukasiewicz word")
    return np.asarray(parent, dtype=np.int64)


def offspring_from_parent(parent) -> np.ndarray:
    parent = np.asarray(parent, dtype=np.int64)
    return np.bincount(parent[parent >= 0], minlength=parent.size)


def sample_offspring_sequence(law: OffspringLaw, n: int, rng: np.random.Generator,
                              max_tries: Optional[int] = None, method: str = "auto") -> np.ndarray:
    """Draw ``n`` offspring counts conditioned on summing to ``n - 1``.

    ``method="rejection"`` redraws whole i.i.d. vectors until the sum is
    right.  ``"auto"`` uses the closed-form conditional law where one exists
    (multinomial for Poisson, uniform weak composition for geometric) and
    rejection otherwise.
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if method not in ("auto", "rejection"):
        raise DomainError(f"unknown sampling method {method!r}")
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    if method == "auto" and law.kind == "poisson":
        return rng.multinomial(n - 1, np.full(n, 1.0 / n)).astype(np.int64)
    if method == "auto" and law.kind == "geometric":
        # stars and bars: n - 1 bars among 2n - 2 slots, counts are the gaps
        bars = np.sort(rng.choice(2 * n - 2, size=n - 1, replace=False))
        edges = np.concatenate(([-1], bars, [2 * n - 2]))
        return (np.diff(edges) - 1).astype(np.int64)
    if max_tries is None:
        max_tries = 2000 * math.ceil(math.sqrt(n)) + 10_000
    batch = int(min(max(8, 3 * math.sqrt(n)), max(1, 2_000_000 // n)))
    tries = 0
    while tries < max_tries:
        rows = min(batch, max_tries - tries)
        xi = law.sample(rng, (rows, n))
        ok = np.flatnonzero(xi.sum(axis=1) == n - 1)
        if ok.size:
            return xi[ok[0]].astype(np.int64)
        tries += rows
    raise UnsupportedError(f"no offspring sequence with total progeny {n} after {max_tries} tries "
                           f"for law {law.kind}")


def sample_conditioned_tree(law: OffspringLaw, n: int, rng: np.random.Generator,
                            max_tries: Optional[int] = None, method: str = "auto") -> np.ndarray:
    """Parent array (preorder) of a GW tree conditioned on ``n`` vertices."""
    xi = sample_offspring_sequence(law, n, rng, max_tries, method)
    return parent_from_offspring(cycle_lemma_rotation(xi))


def total_progeny_check(law: OffspringLaw, n: int) -> float:
    """``P(total progeny = n) = P(xi_1 + ... + xi_n = n - 1) / n`` by exact convolution."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if n > 8:
        raise UnsupportedError("exact progeny check is limited to n <= 8")
    p = law.pmf(np.arange(n))
    dist = np.array([1.0])
    for _ in range(n):
        dist = np.convolve(dist, p)[:n]
    return float(dist[n - 1] / n)


@dataclass(frozen=True)
class ScalingPlan:
    n: int
    edge_scale: float
    mass_scale: float
    node_mass_scale: float = 0.0
    gamma: float = 2.0

    def __post_init__(self):
        if not self.edge_scale > 0 or not self.mass_scale > 0:
            raise DomainError("edge_scale and mass_scale must be positive")
        if not self.node_mass_scale >= 0:
            raise DomainError("node_mass_scale must be non-negative")

    @classmethod
    def unit_mass(cls, n: int, edge_scale: float, node_mass_scale: float = 0.0,
                  gamma: float = 2.0) -> "ScalingPlan":
        """Plan with total mass 1 spread over the ``n - 1`` non-root vertices."""
        if n < 2:
            raise DomainError("a unit-mass plan needs n >= 2")
        return cls(n, edge_scale, 1.0 / (n - 1), node_mass_scale, gamma)

    @property
    def targets_unit_mass(self) -> bool:
        return abs(self.mass_scale * (self.n - 1) - 1.0) <= 1e-12


def rescale(raw_parent, plan: ScalingPlan) -> WTree:
    parent = np.asarray(raw_parent, dtype=np.int64)
    n = parent.size
    edge_len = np.full(n, plan.edge_scale)
    mass = np.full(n, plan.mass_scale)
    root = parent < 0
    edge_len[root] = 0.0
    mass[root] = 0.0
    node_mass = plan.node_mass_scale * np.maximum(0, offspring_from_parent(parent) - 1)
    return build_tree(parent, edge_len, mass, node_mass)


def rescaled_length(n: int, plan: ScalingPlan) -> float:
    """``L_n = (n - 1) * edge_scale``, the total length of the rescaled tree."""
    return (n - 1) * plan.edge_scale


@dataclass(frozen=True)
class Calibration:
    c: float
    edge_scale: float
    rel_stderr: float
    pilot_mean: float
    pilot_reps: int


def edge_scale_from_heights(heights, n: int) -> Calibration:
    """Fix ``c`` so that the mean of ``heights`` (measured at edge scale ``1/sqrt(n)``) maps to the Rayleigh mean."""
    h = np.asarray(heights, dtype=float)
    mean = float(h.mean())
    rel = float(h.std(ddof=1) / (mean * math.sqrt(h.size))) if h.size > 1 else math.inf
    c = RAYLEIGH_MEAN / mean
    return Calibration(c, c / math.sqrt(n), rel, mean, h.size)


def pilot_height(law: OffspringLaw, n: int, rng: np.random.Generator) -> float:
    """Mean depth of the non-root vertices of one conditioned tree, over ``sqrt(n)``."""
    t = build_tree(sample_conditioned_tree(law, n, rng))
    return float(t.depth.sum() / (n - 1) / math.sqrt(n))


def calibrate_edge_scale(law: OffspringLaw, n: int, pilot_reps: int,
                         rng: np.random.Generator, max_rel_stderr: float = 0.05) -> Calibration:
    """Estimate the edge scale making the mean height of a mass-uniform vertex equal ``sqrt(pi/2)``.

    Each pilot tree contributes the average depth of its non-root vertices,
    which is the exact conditional mean of a mass-uniform vertex height.
    """
    if not math.isfinite(law.variance):
        raise UnsupportedError("edge-scale calibration needs a finite-variance offspring law")
    if pilot_reps < 200:
        raise DomainError(f"pilot_reps must be at least 200, got {pilot_reps}")
    if n < 2:
        raise DomainError("calibration needs n >= 2")
    heights = np.array([pilot_height(law, n, rng) for _ in range(pilot_reps)])
    cal = edge_scale_from_heights(heights, n)
    if cal.rel_stderr > max_rel_stderr:
        raise CalibrationError(f"pilot relative stderr {cal.rel_stderr:.3g} exceeds {max_rel_stderr}")
    return cal
