"""
Averaging onto a coarser grid
=============================

Averaging a fine piecewise-constant function over the cells of a coarser
grid never raises convex integrals and never raises Lp norms.
"""

import numpy as np

from rectrof import Grid, PcrFunction, RectPolytope, average, box, lp_norm, make_partition

domain = RectPolytope([box((0, 4), (0, 2))])
fine = make_partition(domain, Grid(((0, 1, 2, 3, 4), (0, 1, 2))))
rng = np.random.default_rng(0)
u = PcrFunction(fine, rng.normal(size=len(fine)))

coarse = Grid(((0, 2, 4), (0, 2)))
Au = average(u, coarse)
print("fine values:  ", np.round(u.values, 3))
print("coarse values:", np.round(Au.values, 3))

# mass is preserved
print("integral before/after:", np.dot(fine.volumes, u.values), np.dot(Au.partition.volumes, Au.values))

for p in (1, 2, np.inf):
    print(f"L{p} norm: {lp_norm(u, p):.4f} -> {lp_norm(Au, p):.4f}")

for name, phi in (("t^2", np.square), ("|t|", np.abs), ("exp", np.exp)):
    before = np.dot(fine.volumes, phi(u.values))
    after = np.dot(Au.partition.volumes, phi(Au.values))
    print(f"integral of {name}: {before:.4f} -> {after:.4f}")
