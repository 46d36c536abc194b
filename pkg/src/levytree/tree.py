"""Discrete weighted rooted trees (w-trees).

A tree is stored as a parent array: ``parent[root] == -1``, ``edge_len[v]`` is
the length of the edge from ``parent[v]`` to ``v``, ``vertex_mass[v]`` is the
mass atom at ``v`` and ``node_mass[v]`` the pruning intensity carried by the
branch point ``v``.  The root carries no mass.

Validation computes a breadth-first layering (``tree.levels``) which the rest
of the package uses for vectorised root-to-leaf scans.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, TreeValidationError

__all__ = [
    "WTree",
    "SpineAtom",
    "SpineDecomposition",
    "build_tree",
    "height_of",
    "mrca",
    "distance",
    "graft",
    "spine_decomposition",
    "sample_vertex_by_mass",
    "tree_to_dict",
    "tree_from_dict",
    "tree_to_json",
    "tree_from_json",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class WTree:
    """Immutable rooted tree with edge lengths and vertex masses.

    Use :func:`build_tree` to construct one; the constructor assumes the
    arrays have already been validated.
    """

    def __init__(self, parent, edge_len, vertex_mass, node_mass, root, levels):
        self.parent = _frozen(np.asarray(parent, dtype=np.int64))
        self.edge_len = _frozen(np.asarray(edge_len, dtype=float))
        self.vertex_mass = _frozen(np.asarray(vertex_mass, dtype=float))
        self.node_mass = _frozen(np.asarray(node_mass, dtype=float))
        self.root = int(root)
        self.levels: tuple[np.ndarray, ...] = tuple(_frozen(l) for l in levels)

    def __len__(self) -> int:
        return self.parent.size

    @property
    def n(self) -> int:
        return self.parent.size

    @cached_property
    def num_children(self) -> np.ndarray:
        nonroot = self.parent >= 0
        return _frozen(np.bincount(self.parent[nonroot], minlength=self.n))

    @cached_property
    def _child_index(self) -> tuple[np.ndarray, np.ndarray]:
        nonroot = np.flatnonzero(self.parent >= 0)
        order = nonroot[np.argsort(self.parent[nonroot], kind="stable")]
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(self.num_children, out=ptr[1:])
        return order, ptr

    def children(self, v: int) -> np.ndarray:
        order, ptr = self._child_index
        return order[ptr[v]:ptr[v + 1]]

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.empty(self.n, dtype=np.int64)
        for k, lvl in enumerate(self.levels):
            d[lvl] = k
        return _frozen(d)

    @cached_property
    def heights(self) -> np.ndarray:
        h = np.zeros(self.n)
        for lvl in self.levels[1:]:
            h[lvl] = h[self.parent[lvl]] + self.edge_len[lvl]
        return _frozen(h)

    @cached_property
    def subtree_mass(self) -> np.ndarray:
        """Mass of the subtree rooted at each vertex, the vertex included."""
        m = np.array(self.vertex_mass, dtype=float)
        for lvl in reversed(self.levels[1:]):
            np.add.at(m, self.parent[lvl], m[lvl])
        return _frozen(m)

    @cached_property
    def total_mass(self) -> float:
        return math.fsum(self.vertex_mass)

    @cached_property
    def total_length(self) -> float:
        return math.fsum(self.edge_len)

    @cached_property
    def leaves(self) -> np.ndarray:
        return _frozen(np.flatnonzero((self.num_children == 0) & (self.parent >= 0)))

    def ancestors(self, v: int) -> list[int]:
        """Vertices on the path from the root to ``v``, both included."""
        self._check_index(v)
        path = [int(v)]
        while self.parent[path[-1]] >= 0:
            path.append(int(self.parent[path[-1]]))
        return path[::-1]

    def subtree_vertices(self, v: int) -> np.ndarray:
        """All descendants of ``v`` including ``v``."""
        out = [np.array([v], dtype=np.int64)]
        frontier = out[0]
        order, ptr = self._child_index
        while frontier.size:
            frontier = _gather_children(order, ptr, frontier)
            out.append(frontier)
        return np.concatenate(out)

    def _check_index(self, v):
        if not (isinstance(v, (int, np.integer)) and 0 <= v < self.n):
            raise DomainError(f"vertex index {v!r} out of range for tree of size {self.n}")

    def __repr__(self):
        return (f"WTree(n={self.n}, total_length={self.total_length:.6g}, "
                f"total_mass={self.total_mass:.6g})")


def _gather_children(order, ptr, frontier):
    starts = ptr[frontier]
    counts = ptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(starts - np.cumsum(counts) + counts, counts)
    return order[offsets + np.arange(total)]


def build_tree(parent, edge_len=None, vertex_mass=None, node_mass=None) -> WTree:
    """Validate the arrays and return a :class:`WTree`.

    ``edge_len`` defaults to unit edges, ``vertex_mass`` to zero and
    ``node_mass`` to zero.  Raises :class:`TreeValidationError` naming the
    first offending index.
    """
    parent = np.asarray(parent, dtype=np.int64).ravel()
    n = parent.size
    if n == 0:
        raise TreeValidationError("tree must have at least one vertex")
    roots = np.flatnonzero(parent < 0)
    if roots.size != 1:
        which = "no root" if roots.size == 0 else f"multiple roots at indices {roots.tolist()}"
        raise TreeValidationError(f"parent array has {which}")
    root = int(roots[0])
    if np.any(parent[parent >= 0] >= n):
        bad = int(np.flatnonzero(parent >= n)[0])
        raise TreeValidationError(f"parent[{bad}] = {parent[bad]} is out of range")
    self_loops = np.flatnonzero(parent == np.arange(n))
    if self_loops.size:
        raise TreeValidationError(f"vertex {int(self_loops[0])} is its own parent")

    def _arr(x, default, name):
        if x is None:
            a = np.full(n, default, dtype=float)
        else:
            a = np.asarray(x, dtype=float).ravel()
        if a.size != n:
            raise TreeValidationError(f"{name} has length {a.size}, expected {n}")
        bad = np.flatnonzero(~np.isfinite(a) | (a < 0))
        if bad.size:
            raise TreeValidationError(f"{name}[{int(bad[0])}] = {a[bad[0]]} must be finite and non-negative")
        return a

    if edge_len is None:
        edge_len = np.ones(n)
        edge_len[root] = 0.0
    edge_len = _arr(edge_len, 1.0, "edge_len")
    vertex_mass = _arr(vertex_mass, 0.0, "vertex_mass")
    node_mass = _arr(node_mass, 0.0, "node_mass")
    if edge_len[root] != 0:
        raise TreeValidationError(f"edge_len[{root}] of the root must be 0, got {edge_len[root]}")
    zero = np.flatnonzero(edge_len <= 0)
    zero = zero[zero != root]
    if zero.size:
        raise TreeValidationError(f"edge_len[{int(zero[0])}] must be positive for a non-root vertex")
    if vertex_mass[root] != 0:
        raise TreeValidationError(f"vertex_mass[{root}] of the root must be 0, got {vertex_mass[root]}")

    # breadth-first layering; vertices never reached sit on a cycle
    nonroot = np.flatnonzero(parent >= 0)
    order = nonroot[np.argsort(parent[nonroot], kind="stable")]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(parent[nonroot], minlength=n), out=ptr[1:])
    levels = [np.array([root], dtype=np.int64)]
    seen = 1
    while True:
        nxt = _gather_children(order, ptr, levels[-1])
        if nxt.size == 0:
            break
        levels.append(nxt)
        seen += nxt.size
    if seen != n:
        reached = np.zeros(n, dtype=bool)
        for l in levels:
            reached[l] = True
        bad = int(np.flatnonzero(~reached)[0])
        raise TreeValidationError(f"vertex {bad} is not connected to the root (cycle in parent links)")
    return WTree(parent, edge_len, vertex_mass, node_mass, root, levels)


def height_of(tree: WTree, v: int) -> float:
    tree._check_index(v)
    return float(tree.heights[v])


def mrca(tree: WTree, u: int, v: int) -> int:
    tree._check_index(u)
    tree._check_index(v)
    d, p = tree.depth, tree.parent
    u, v = int(u), int(v)
    while d[u] > d[v]:
        u = int(p[u])
    while d[v] > d[u]:
        v = int(p[v])
    while u != v:
        u, v = int(p[u]), int(p[v])
    return u


def distance(tree: WTree, u: int, v: int) -> float:
    h = tree.heights
    return float(h[u] + h[v] - 2.0 * h[mrca(tree, u, v)])


def graft(base: WTree, grafts: Sequence[tuple[WTree, int]] = ()) -> WTree:
    """Graft each subtree onto ``base`` by identifying its root with the attach vertex.

    The subtree root's mass and node mass are added to the attach vertex.
    """
    parents = [base.parent]
    lens = [base.edge_len]
    masses = [np.array(base.vertex_mass)]
    nodes = [np.array(base.node_mass)]
    n = base.n
    for sub, x in grafts:
        base._check_index(x)
        keep = np.flatnonzero(np.arange(sub.n) != sub.root)
        new_index = np.full(sub.n, -1, dtype=np.int64)
        new_index[keep] = n + np.arange(keep.size)
        new_index[sub.root] = x
        parents.append(new_index[sub.parent[keep]])
        lens.append(sub.edge_len[keep])
        masses.append(sub.vertex_mass[keep])
        nodes.append(sub.node_mass[keep])
        masses[0][x] += sub.vertex_mass[sub.root]
        nodes[0][x] += sub.node_mass[sub.root]
        n += keep.size
    return build_tree(np.concatenate(parents), np.concatenate(lens),
                      np.concatenate(masses), np.concatenate(nodes))


@dataclass(frozen=True)
class SpineAtom:
    h: float
    mass: float
    attach: int
    members: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SpineDecomposition:
    leaf: int
    height: float
    atoms: tuple[SpineAtom, ...]


def spine_decomposition(tree: WTree, leaf: int, *, require_leaf: bool = True,
                        keep_members: bool = False) -> SpineDecomposition:
    """Cut the tree along the path from the root to ``leaf``.

    Every vertex ``w`` on the path yields one atom at height ``h(w)`` whose
    mass is ``vertex_mass[w]`` plus the masses of all components hanging off
    ``w``.  The leaf's own mass is not part of any atom.  With
    ``require_leaf=False`` an internal vertex is accepted; components below it
    then form an atom at the full height.
    """
    tree._check_index(leaf)
    if require_leaf and tree.num_children[leaf] > 0:
        raise DomainError(f"vertex {leaf} has {tree.num_children[leaf]} children, expected a leaf")
    path = tree.ancestors(leaf)
    on_path = set(path)
    sub = tree.subtree_mass
    atoms = []
    for k, w in enumerate(path):
        off = [int(c) for c in tree.children(w) if int(c) not in on_path]
        mass = math.fsum(sub[off]) if off else 0.0
        if w != leaf:
            mass = math.fsum((mass, tree.vertex_mass[w]))
        if not off and mass == 0.0:
            continue
        members = None
        if keep_members:
            parts = [np.array([w])] if w != leaf else []
            parts += [tree.subtree_vertices(c) for c in off]
            members = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        atoms.append(SpineAtom(float(tree.heights[w]), mass, w, members))
    return SpineDecomposition(int(leaf), float(tree.heights[leaf]), tuple(atoms))


def sample_vertex_by_mass(tree: WTree, rng: np.random.Generator) -> int:
    """Draw a vertex with probability ``vertex_mass[v] / total_mass``."""
    total = tree.total_mass
    if not total > 0:
        raise DomainError("cannot sample from a tree with zero total mass")
    cum = np.cumsum(tree.vertex_mass)
    u = rng.random() * cum[-1]
    return int(min(np.searchsorted(cum, u, side="right"), tree.n - 1))


# -- serialisation ----------------------------------------------------------

def tree_to_dict(tree: WTree) -> dict:
    return {
        "parent": tree.parent.tolist(),
        "edge_len": tree.edge_len.tolist(),
        "vertex_mass": tree.vertex_mass.tolist(),
        "node_mass": tree.node_mass.tolist(),
        "root": tree.root,
    }


def tree_from_dict(d: dict) -> WTree:
    t = build_tree(d["parent"], d["edge_len"], d["vertex_mass"], d.get("node_mass"))
    if "root" in d and int(d["root"]) != t.root:
        raise TreeValidationError(f"declared root {d['root']} does not match parent array root {t.root}")
    return t


def tree_to_json(tree: WTree) -> str:
    return json.dumps(tree_to_dict(tree))


def tree_from_json(text: str) -> WTree:
    return tree_from_dict(json.loads(text))
