"""
======================================
Distance covariance of ranks and signs
======================================

The statistic is ``n`` times the unbiased distance covariance of the two
margins' center-outward values.  Three estimators are provided and agree.
"""
import numpy as np

from rankdcov.dcov import dcov_double_centered, dcov_fast, dcov_naive, statistic_mhat
from rankdcov.grid import make_grid

rng = np.random.default_rng(1)
x = rng.standard_normal((12, 2))
y = x[:, :1] ** 2 + rng.standard_normal((12, 1))
print("naive    ", dcov_naive(x, y))
print("fast     ", dcov_fast(x, y))
print("centered ", dcov_double_centered(x, y))

n = 300
x = rng.standard_normal((n, 2))
y = np.c_[np.sin(3 * x[:, 0]), x[:, 1] ** 2] + 0.3 * rng.standard_normal((n, 2))
gx, gy = make_grid(n, 2), make_grid(n, 2, seed=1)
print("M_n, dependent pair:  ", statistic_mhat(x, y, gx, gy))
print("M_n, independent pair:", statistic_mhat(x, rng.permutation(y), gx, gy))
