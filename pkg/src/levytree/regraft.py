"""Regrafting pruned classes on a single branch, and the matching spine summaries.

The regraft tree is a massless branch of length ``Theta``; class ``i`` hangs
off it at distance ``Theta_{theta_i}`` from the branch root.  Its law is
compared against the spine decomposition of a tree at a mass-uniform vertex
(height ``H`` and the masses hanging off the spine).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .record import PruneDecomposition
from .tree import WTree, build_tree, graft, spine_decomposition

__all__ = [
    "MERGE_TOL",
    "RegraftSummary",
    "build_regraft_tree",
    "regraft_summary",
    "bismut_summary",
    "summarize_atoms",
    "branch_end",
]

MERGE_TOL = 1e-15


@dataclass(frozen=True)
class RegraftSummary:
    """Branch length, (position, mass) atoms and mass-threshold statistics."""

    kind: str
    branch_len: float
    positions: np.ndarray
    masses: np.ndarray
    thresholds: tuple[float, ...]
    counts: tuple[int, ...]
    small_mass: tuple[float, ...]

    @property
    def n_atoms(self) -> int:
        return int(self.masses.size)

    def count_at(self, eps: float) -> int:
        return self.counts[self.thresholds.index(eps)]


def _check_thresholds(thresholds) -> tuple[float, ...]:
    eps = tuple(float(e) for e in thresholds)
    if any(not (e > 0 and math.isfinite(e)) for e in eps):
        raise DomainError(f"thresholds must be positive and finite, got {eps}")
    return eps


def summarize_atoms(kind: str, branch_len: float, positions, masses, thresholds) -> RegraftSummary:
    eps = _check_thresholds(thresholds)
    positions = np.asarray(positions, dtype=float)
    masses = np.asarray(masses, dtype=float)
    counts = tuple(int(np.count_nonzero(masses >= e)) for e in eps)
    small = tuple(math.fsum(masses[masses <= e]) for e in eps)
    return RegraftSummary(kind, float(branch_len), positions, masses, eps, counts, small)


def regraft_summary(decomp: PruneDecomposition, thresholds: Sequence[float]) -> RegraftSummary:
    return summarize_atoms("regraft", decomp.Theta, decomp.graft_positions, decomp.sigmas, thresholds)


def bismut_summary(tree: WTree, leaf: int, thresholds: Sequence[float], *,
                   require_leaf: bool = True) -> RegraftSummary:
    sd = spine_decomposition(tree, leaf, require_leaf=require_leaf)
    return summarize_atoms("bismut", sd.height, [a.h for a in sd.atoms], [a.mass for a in sd.atoms], thresholds)


def _branch_stops(positions: np.ndarray, Theta: float) -> np.ndarray:
    """Distinct stops along the branch, 0 first, merging near-coincident positions."""
    stops = [0.0]
    for p in np.sort(positions):
        if p - stops[-1] > MERGE_TOL:
            stops.append(float(p))
    if Theta - stops[-1] > MERGE_TOL:
        stops.append(float(Theta))
    return np.array(stops)


def build_regraft_tree(decomp: PruneDecomposition, subtrees: Sequence[WTree]) -> WTree:
    """Assemble the regraft tree; vertex 0 is the branch root."""
    classes = decomp.classes
    if len(subtrees) != len(classes):
        raise DomainError(f"got {len(subtrees)} subtrees for {len(classes)} classes")
    Theta = decomp.Theta
    pos = decomp.graft_positions
    for i, (c, s) in enumerate(zip(classes, subtrees)):
        if not -MERGE_TOL <= c.graft_pos <= Theta + MERGE_TOL:
            raise DomainError(f"class {i} graft position {c.graft_pos} outside [0, {Theta}]")
        if abs(s.total_mass - c.sigma) > 1e-12 * max(1.0, c.sigma):
            raise DomainError(f"subtree {i} has mass {s.total_mass}, class mass is {c.sigma}")
    stops = _branch_stops(pos, Theta)
    k = stops.size
    parent = np.arange(-1, k - 1)
    edge = np.concatenate(([0.0], np.diff(stops)))
    branch = build_tree(parent, edge, np.zeros(k))
    # each class goes to the last stop not beyond its position
    at = np.searchsorted(stops, pos + MERGE_TOL, side="right") - 1
    return graft(branch, [(s, int(a)) for s, a in zip(subtrees, at)])


def branch_end(tree: WTree, decomp: PruneDecomposition) -> int:
    """Vertex at the far end of the branch in a tree from :func:`build_regraft_tree`."""
    return int(_branch_stops(decomp.graft_positions, decomp.Theta).size - 1)
