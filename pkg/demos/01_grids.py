"""
=================
Augmented grids
=================

A grid with ``n`` points puts ``n_R`` radii on each of ``n_S`` rays and
adds ``n_0`` copies of the origin.  The grid is the discrete stand-in for
the spherical uniform law on the unit ball.
"""
import numpy as np

from rankdcov.grid import directions_deterministic, factorize, make_grid

# Factorizations for a few sample sizes and dimensions.
for n, d in [(216, 1), (216, 2), (216, 3), (500, 5)]:
    print(n, d, factorize(n, d))

# In two dimensions deterministic directions are equally spaced angles.
g = make_grid(216, 2)
print("points:", g.points.shape, "origin copies:", g.spec.n_0)
print("radii:", np.unique(np.round(np.linalg.norm(g.points, axis=1), 4))[:5], "...")

# In three dimensions the polar angle is chosen so that heights are evenly
# spread over [-1, 1], which is what the uniform law on the sphere requires.
u = directions_deterministic(3, (4, 6))
print("distinct heights:", np.unique(np.round(u[:, 0], 6)))
