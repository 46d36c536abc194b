"""Prune a conditioned Galton-Watson tree by Poisson marks and regraft the classes on one branch.

Run with ``python3 demos/02_prune_and_regraft.py``.
"""
# %%
import math

import numpy as np

from levytree.gwgen import OffspringLaw, ScalingPlan, rescale, sample_conditioned_tree
from levytree.record import assign_marks, class_subtrees, decompose_classes, theta_integral
from levytree.regraft import branch_end, build_regraft_tree, regraft_summary
from levytree.tree import spine_decomposition

rng = np.random.default_rng(1)
n = 2000

# %% a Poisson(1) tree on n vertices; edges scaled by 1/sqrt(n), every vertex carries mass 1/n
raw = sample_conditioned_tree(OffspringLaw("poisson"), n, rng)
tree = rescale(raw, ScalingPlan.unit_mass(n, 1 / math.sqrt(n)))
print(f"height {tree.heights.max():.3f}, total length {tree.total_length:.2f}, mass {tree.total_mass:.12f}")

# %% marks along edges at rate beta; theta(v) is the first time the path to v gets cut
marked = assign_marks(tree, 0.5, rng)
decomp = decompose_classes(marked)
print(f"{len(decomp.classes)} classes, Theta = {decomp.Theta:.4f}")
print("largest classes (theta, sigma):",
      [(round(c.theta, 3), round(c.sigma, 4)) for c in sorted(decomp.classes, key=lambda c: -c.sigma)[:5]])
print("class masses sum to", math.fsum(decomp.sigmas))

# %% graft positions are the integral of the remaining mass up to each record time
for c in decomp.classes[:3]:
    print(f"theta={c.theta:.4f}: graft position {c.graft_pos:.6f} vs integral {theta_integral(marked, c.theta):.6f}")

# %% the regrafted tree carries the classes as atoms along a branch of length Theta
regraft = build_regraft_tree(decomp, class_subtrees(marked, decomp))
spine = spine_decomposition(regraft, branch_end(regraft, decomp), require_leaf=False)
print(f"regraft tree: {regraft.n} vertices, mass {regraft.total_mass:.12f}, spine height {spine.height:.4f}")
s = regraft_summary(decomp, (0.1, 0.05, 0.02))
print("atoms with mass >= eps:", dict(zip(s.thresholds, s.counts)))
