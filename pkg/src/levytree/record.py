"""Poisson marks on a weighted tree, the record process and its class decomposition.

Marks fall on edges at rate ``2 * beta`` per unit length and on branch
points at rate ``node_mass``.  Only the first mark on each edge and at each
vertex matters: the record value ``theta(v)`` is the first time a mark
appears on the path from the root to ``v``.  A node mark at ``p`` caps the
record of every strict descendant of ``p`` but not of ``p`` itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CorrectnessAlarm, DomainError
from .tree import WTree, build_tree

__all__ = [
    "MarkedTree",
    "PruneClass",
    "PruneDecomposition",
    "assign_marks",
    "marked_from_times",
    "pruned_mass",
    "theta_integral",
    "step_integral",
    "decompose_classes",
    "class_subtrees",
    "count_cuts_edges",
    "count_cuts_vertices",
    "cuts_edges_from_keys",
    "cuts_vertices_from_keys",
]

_INF = math.inf


@dataclass(frozen=True)
class MarkedTree:
    tree: WTree
    edge_mark: np.ndarray
    node_mark: np.ndarray
    theta: np.ndarray
    # class label key per vertex: v for a class opened by the mark on the
    # edge above v, n + p for one opened by the node mark at p, -1 if theta is infinite
    class_key: np.ndarray


def _exp_times(rate: np.ndarray, std_exp: np.ndarray) -> np.ndarray:
    out = np.full(rate.shape, _INF)
    pos = rate > 0
    out[pos] = std_exp[pos] / rate[pos]
    return out


def assign_marks(tree: WTree, beta: float, rng: np.random.Generator) -> MarkedTree:
    """Draw first-mark times on every edge and branch point, then the records."""
    if not (beta >= 0 and math.isfinite(beta)):
        raise DomainError(f"beta must be a finite non-negative number, got {beta}")
    e = rng.standard_exponential(size=(2, tree.n))
    edge_mark = _exp_times(2.0 * beta * np.asarray(tree.edge_len), e[0])
    edge_mark[tree.root] = _INF
    node_mark = _exp_times(np.asarray(tree.node_mass), e[1])
    return marked_from_times(tree, edge_mark, node_mark)


def marked_from_times(tree: WTree, edge_mark, node_mark) -> MarkedTree:
    """Compute records and class keys from given first-mark times."""
    n = tree.n
    edge_mark = np.asarray(edge_mark, dtype=float).copy()
    node_mark = np.asarray(node_mark, dtype=float).copy()
    if edge_mark.shape != (n,) or node_mark.shape != (n,):
        raise DomainError("mark arrays must have one entry per vertex")
    if np.any(np.isnan(edge_mark)) or np.any(edge_mark < 0) or np.any(np.isnan(node_mark)) or np.any(node_mark < 0):
        raise DomainError("mark times must be non-negative")
    edge_mark[tree.root] = _INF
    theta = np.full(n, _INF)
    key = np.full(n, -1, dtype=np.int64)
    for lvl in tree.levels[1:]:
        p = tree.parent[lvl]
        tp, nm, em = theta[p], node_mark[p], edge_mark[lvl]
        t = np.minimum(tp, np.minimum(nm, em))
        theta[lvl] = t
        fresh = t < tp
        key[lvl] = np.where(fresh, np.where(em < nm, lvl, n + p), key[p])
    for a in (edge_mark, node_mark, theta, key):
        a.setflags(write=False)
    return MarkedTree(tree, edge_mark, node_mark, theta, key)


def pruned_mass(marked: MarkedTree, q: float) -> float:
    """Mass of the pruned tree ``{theta >= q}``."""
    keep = marked.theta >= q
    return math.fsum(marked.tree.vertex_mass[keep])


def _check_prunable(marked: MarkedTree) -> None:
    bad = np.flatnonzero((marked.tree.vertex_mass > 0) & np.isinf(marked.theta))
    if bad.size:
        raise DomainError(f"vertex {int(bad[0])} carries mass but is never pruned (theta = inf)")


def step_integral(marked: MarkedTree, q: float) -> float:
    """``int_q^inf sigma_r dr`` evaluated exactly on the step function ``r -> sigma_r``."""
    _check_prunable(marked)
    m = marked.tree.vertex_mass
    pos = m > 0
    th, mm = marked.theta[pos], m[pos]
    levels, inv = np.unique(th, return_inverse=True)
    mass_at = np.bincount(inv, weights=mm, minlength=levels.size)
    # sigma_r on (levels[k-1], levels[k]] is the mass with theta >= levels[k]
    tail = np.cumsum(mass_at[::-1])[::-1]
    lo = np.concatenate(([0.0], levels[:-1]))
    widths = np.clip(levels - np.maximum(lo, q), 0.0, None)
    return math.fsum(tail * widths)


def theta_integral(marked: MarkedTree, q: float) -> float:
    """``Theta_q = sum_v m(v) (theta(v) - q)^+``, checked against the step integral."""
    if not q >= 0:
        raise DomainError(f"q must be non-negative, got {q}")
    _check_prunable(marked)
    m = marked.tree.vertex_mass
    pos = m > 0
    direct = math.fsum(m[pos] * np.maximum(marked.theta[pos] - q, 0.0))
    other = step_integral(marked, q)
    if abs(direct - other) > 1e-12 * max(1.0, direct):
        raise CorrectnessAlarm(f"Theta_q formulas disagree: {direct!r} vs {other!r}")
    return direct


@dataclass(frozen=True)
class PruneClass:
    theta: float
    attach: int
    members: np.ndarray
    sigma: float
    graft_pos: float


@dataclass(frozen=True)
class PruneDecomposition:
    classes: tuple[PruneClass, ...]
    Theta: float

    @property
    def thetas(self) -> np.ndarray:
        return np.array([c.theta for c in self.classes])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([c.sigma for c in self.classes])

    @property
    def graft_positions(self) -> np.ndarray:
        return np.array([c.graft_pos for c in self.classes])


def decompose_classes(marked: MarkedTree) -> PruneDecomposition:
    """Split the vertices with finite record into maximal constant-record classes.

    Classes come back sorted by ``theta`` descending, so the first one has
    graft position 0.
    """
    _check_prunable(marked)
    tree = marked.tree
    n = tree.n
    finite = np.flatnonzero(marked.class_key >= 0)
    if finite.size == 0:
        return PruneDecomposition((), 0.0)
    keys, inv = np.unique(marked.class_key[finite], return_inverse=True)
    k = keys.size
    theta_c = np.empty(k)
    theta_c[inv] = marked.theta[finite]
    if np.unique(theta_c).size != k:
        raise CorrectnessAlarm("two distinct classes share a record value; marks are not continuous")
    attach = np.where(keys >= n, keys - n, tree.parent[np.minimum(keys, n - 1)])
    order_members = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order_members], np.arange(k + 1))
    members = [finite[order_members[bounds[i]:bounds[i + 1]]] for i in range(k)]
    sigma = np.array([math.fsum(tree.vertex_mass[mem]) for mem in members])

    order = np.argsort(-theta_c, kind="stable")
    th, sg = theta_c[order], sigma[order]
    # Theta_{theta_k} = sum_{j<k} sigma_j (theta_j - theta_k), built as a step integral
    pos = np.zeros(k)
    if k > 1:
        above = np.cumsum(sg)[:-1]
        pos[1:] = np.cumsum(above * (th[:-1] - th[1:]))
    Theta = math.fsum(sg * th)
    pos = np.minimum(pos, Theta)
    classes = tuple(
        PruneClass(float(th[i]), int(attach[order[i]]), members[order[i]], float(sg[i]), float(pos[i]))
        for i in range(k)
    )
    return PruneDecomposition(classes, Theta)


def class_subtrees(marked: MarkedTree, decomp: PruneDecomposition) -> list[WTree]:
    """One tree per class, rooted at its attach vertex (which carries no mass)."""
    tree = marked.tree
    out = []
    for c in decomp.classes:
        verts = np.concatenate(([c.attach], c.members))
        local = np.full(tree.n, -1, dtype=np.int64)
        local[verts] = np.arange(verts.size)
        parent = local[tree.parent[verts]]
        parent[0] = -1
        edge = np.array(tree.edge_len[verts])
        mass = np.array(tree.vertex_mass[verts])
        node = np.array(tree.node_mass[verts])
        edge[0] = mass[0] = node[0] = 0.0
        out.append(build_tree(parent, edge, mass, node))
    return out


# -- cutting down random trees ---------------------------------------------
#
# Picking a uniform surviving edge at every step is the same as walking
# through the edges in a uniform random order and skipping dead ones, so
# both counters reduce to record statistics of i.i.d. uniform edge keys.
# Key k[..., v] belongs to the edge from parent(v) to v.

@lru_cache(maxsize=16)
def _cached_levels(raw: bytes) -> tuple[np.ndarray, ...]:
    return build_tree(np.frombuffer(raw, dtype=np.int64)).levels


def _levels_of(parent: np.ndarray) -> tuple[np.ndarray, ...]:
    return _cached_levels(np.ascontiguousarray(parent, dtype=np.int64).tobytes())


def cuts_edges_from_keys(parent, keys) -> np.ndarray:
    """Number of picks until the root is isolated; ``keys`` has shape (..., n)."""
    parent = np.asarray(parent, dtype=np.int64)
    keys = np.asarray(keys, dtype=float)
    levels = _levels_of(parent)
    path_min = np.full(keys.shape, _INF)
    count = np.zeros(keys.shape[:-1], dtype=np.int64)
    for lvl in levels[1:]:
        pm = path_min[..., parent[lvl]]
        kv = keys[..., lvl]
        count += np.sum(kv < pm, axis=-1)
        path_min[..., lvl] = np.minimum(pm, kv)
    return count


def cuts_vertices_from_keys(parent, keys) -> np.ndarray:
    """Number of picks until the root is removed (or no edge survives).

    Picking edge ``(p, c)`` removes ``p`` with everything below it.  Let
    ``tau(u)`` be the first key on an out-edge ``(u, c)`` that comes before
    ``c`` removes itself.  Vertex ``u`` is removed by its own pick exactly
    when ``tau(u)`` beats every ``tau`` of its strict ancestors.
    """
    parent = np.asarray(parent, dtype=np.int64)
    keys = np.asarray(keys, dtype=float)
    levels = _levels_of(parent)
    tau = np.full(keys.shape, _INF)
    for lvl in reversed(levels[1:]):
        kv = keys[..., lvl]
        cand = np.where(kv < tau[..., lvl], kv, _INF)
        # reduce over siblings along the vertex axis
        np.minimum.at(np.moveaxis(tau, -1, 0), parent[lvl], np.moveaxis(cand, -1, 0))
    anc_min = np.full(keys.shape, _INF)
    root = levels[0]
    count = np.sum(tau[..., root] < _INF, axis=-1).astype(np.int64)
    for lvl in levels[1:]:
        am = np.minimum(anc_min[..., parent[lvl]], tau[..., parent[lvl]])
        anc_min[..., lvl] = am
        count += np.sum(tau[..., lvl] < am, axis=-1)
    return count


def count_cuts_edges(raw, rng: np.random.Generator, size=None):
    """Meir-Moon cut count for one run (``size=None``) or a batch of runs."""
    parent = np.asarray(raw, dtype=np.int64)
    shape = (parent.size,) if size is None else (size, parent.size)
    out = cuts_edges_from_keys(parent, rng.random(shape))
    return int(out) if size is None else out


def count_cuts_vertices(raw, rng: np.random.Generator, size=None):
    """Vertex-pruning cut count; 0 for a single vertex."""
    parent = np.asarray(raw, dtype=np.int64)
    shape = (parent.size,) if size is None else (size, parent.size)
    out = cuts_vertices_from_keys(parent, rng.random(shape))
    return int(out) if size is None else out
