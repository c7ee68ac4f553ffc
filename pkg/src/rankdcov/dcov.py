"""
Sample distance covariance and the center-outward rank statistic.

``dcov_fast`` is the production estimator (``O(n^2)``); ``dcov_naive``
averages the symmetrized order-4 kernel over all 4-subsets and is kept as
a reference.  ``dcov_double_centered`` is the ``U``-centered form and is
used as a third cross-check.
"""
from __future__ import annotations

from itertools import combinations, permutations

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from .assignment import DEFAULT_SCALE, Solver, center_outward
from .grid import AugmentedGrid

NAIVE_MAX_N = 64


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a 1-D or 2-D array, got shape {a.shape}")
    return a


def check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate a paired sample and return both parts as 2-D float arrays."""
    x, y = _as_2d(x), _as_2d(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"row counts differ: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 4:
        raise ValueError(f"distance covariance needs n >= 4, got n={x.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("sample contains NaN or infinite values")
    return x, y


def distance_matrix(x) -> np.ndarray:
    x = _as_2d(x)
    return cdist(x, x)


def dcov_from_distances(a: np.ndarray, b: np.ndarray) -> float:
    """Unbiased ``dCov^2_n`` from two ``n x n`` distance matrices."""
    n = a.shape[0]
    a_row = a.sum(axis=1)
    b_row = b.sum(axis=1)
    # diagonals are zero, so the full sum equals the sum over i != j
    t1 = np.einsum("ij,ij->", a, b) / (n * (n - 3))
    t2 = 2.0 * (a_row @ b_row) / (n * (n - 2) * (n - 3))
    t3 = a_row.sum() * b_row.sum() / (n * (n - 1) * (n - 2) * (n - 3))
    return float(t1 - t2 + t3)


def dcov_fast(x, y) -> float:
    """Unbiased sample distance covariance in ``O(n^2)``.

    Uses ``sum_{i!=j} a_ij b_ij / (n(n-3)) - 2 sum_i a_i+ b_i+ / (n(n-2)(n-3))
    + a_++ b_++ / (n(n-1)(n-2)(n-3))`` where ``a`` and ``b`` are the pairwise
    Euclidean distance matrices.
    """
    x, y = check_pair(x, y)
    return dcov_from_distances(distance_matrix(x), distance_matrix(y))


def permuted_statistics(a: np.ndarray, b: np.ndarray, perms) -> np.ndarray:
    """``n * dCov^2_n`` between ``a`` and ``b`` re-paired by each permutation.

    ``a`` and ``b`` are distance matrices; permutation ``pi`` pairs row
    ``i`` of the first sample with row ``pi[i]`` of the second.
    """
    n = a.shape[0]
    a_row = a.sum(axis=1)
    b_row = b.sum(axis=1)
    c1 = n * (n - 3)
    c2 = 2.0 / (n * (n - 2) * (n - 3))
    t3 = a_row.sum() * b_row.sum() / (n * (n - 1) * (n - 2) * (n - 3))
    out = np.empty(len(perms))
    for k, pi in enumerate(perms):
        bp = b[np.ix_(pi, pi)]
        out[k] = n * (np.einsum("ij,ij->", a, bp) / c1 - c2 * (a_row @ b_row[pi]) + t3)
    return out


def _s(d: np.ndarray, idx: np.ndarray, order: tuple[int, int, int, int]) -> np.ndarray:
    t1, t2, t3, t4 = (idx[:, k] for k in order)
    return d[t1, t2] + d[t3, t4] - d[t1, t3] - d[t2, t4]


def dcov_naive(x, y) -> float:
    """Order-4 U-statistic with the symmetrized kernel, by enumeration.

    Each 4-subset contributes ``(1 / (4 * 4!)) * sum_perm s(x) s(y)`` with
    ``s(t1, t2, t3, t4) = |t1-t2| + |t3-t4| - |t1-t3| - |t2-t4|``.
    Restricted to ``n <= 64``.
    """
    x, y = check_pair(x, y)
    n = x.shape[0]
    if n > NAIVE_MAX_N:
        raise ValueError(f"dcov_naive is limited to n <= {NAIVE_MAX_N}, got n={n}")
    a, b = distance_matrix(x), distance_matrix(y)
    idx = np.array(list(combinations(range(n), 4)), dtype=np.intp)
    acc = np.zeros(len(idx))
    for order in permutations(range(4)):
        acc += _s(a, idx, order) * _s(b, idx, order)
    return float(acc.sum() / (4 * 24) / len(idx))


def _u_center(d: np.ndarray) -> np.ndarray:
    n = d.shape[0]
    row = d.sum(axis=1)
    out = d - row[:, None] / (n - 2) - row[None, :] / (n - 2) + row.sum() / ((n - 1) * (n - 2))
    np.fill_diagonal(out, 0.0)
    return out


def dcov_double_centered(x, y) -> float:
    """``sum_{i!=j} A~_ij B~_ij / (n(n-3))`` with U-centered distances."""
    x, y = check_pair(x, y)
    n = x.shape[0]
    a = _u_center(distance_matrix(x))
    b = _u_center(distance_matrix(y))
    return float(np.einsum("ij,ij->", a, b) / (n * (n - 3)))


def marginal_ranks(m) -> np.ndarray:
    """Columnwise ranks in ``1..n``; ties receive their average rank."""
    m = np.asarray(m, dtype=float)
    return rankdata(m, method="average", axis=0)


def statistic_mhat(
    x,
    y,
    grid_x: AugmentedGrid,
    grid_y: AugmentedGrid,
    solver: Solver = "hungarian",
    scale: int = DEFAULT_SCALE,
) -> float:
    """``n * dCov^2_n`` of the two margins' empirical center-outward values."""
    x, y = check_pair(x, y)
    fx = center_outward(x, grid_x, solver, scale).values
    fy = center_outward(y, grid_y, solver, scale).values
    return x.shape[0] * dcov_fast(fx, fy)
