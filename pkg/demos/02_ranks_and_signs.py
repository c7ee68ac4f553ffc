"""
==============================
Center-outward ranks and signs
==============================

The empirical center-outward distribution function is the optimal
assignment of the sample to the grid under squared Euclidean cost.  Its
norm, rescaled, is the rank; its direction is the sign.
"""
import numpy as np

from rankdcov.assignment import center_outward, lsap_gabow_tarjan, lsap_hungarian, squared_distance_costs
from rankdcov.grid import make_grid

rng = np.random.default_rng(0)
x = rng.standard_t(df=2, size=(100, 2))  # heavy tails do not matter for ranks
g = make_grid(100, 2)

s = center_outward(x, g)
far = np.argmax(np.linalg.norm(x, axis=1))
print("most outlying point", x[far].round(2), "has rank", s.ranks[far], "of", g.spec.n_R)
print("sign of that point:", s.signs[far].round(3))

# Both solvers find the same optimal cost.  Gabow-Tarjan works on integer
# costs, so the real costs are rounded at 2**-20 first.
c = squared_distance_costs(x, g.points)
q = np.round(c * 2**20).astype(np.int64)
print("hungarian:", lsap_hungarian(q).total_cost, " gabow-tarjan:", lsap_gabow_tarjan(q).total_cost)
