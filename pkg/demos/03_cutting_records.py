"""Random cutting of small trees: exact means against simulation.

Run with ``python3 demos/03_cutting_records.py``.
"""
# %%
import numpy as np

from levytree.gwgen import OffspringLaw, sample_conditioned_tree
from levytree.record import count_cuts_edges, count_cuts_vertices

rng = np.random.default_rng(3)
reps = 200_000

# %% a path of three vertices needs 3/2 edge cuts on average to isolate the root
path = np.array([-1, 0, 1])
x = count_cuts_edges(path, rng, size=reps)
print(f"path: mean edge cuts {x.mean():.4f} (exact 1.5), vertex-record count {count_cuts_vertices(path, rng, size=reps).mean():.4f}")

# %% a star: every edge hangs off the root, so each cut removes one leaf
star = np.array([-1, 0, 0, 0, 0])
print(f"star with 4 leaves: mean edge cuts {count_cuts_edges(star, rng, size=reps).mean():.4f} (exact 4)")

# %% cuts grow like sqrt(n) on conditioned Galton-Watson trees
law = OffspringLaw("poisson")
for n in (100, 400, 1600):
    counts = [count_cuts_edges(sample_conditioned_tree(law, n, rng), rng) for _ in range(200)]
    print(f"n={n:5d}: mean cuts / sqrt(n) = {np.mean(counts) / np.sqrt(n):.3f}")
