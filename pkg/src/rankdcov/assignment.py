"""
Linear sum assignment and empirical center-outward scores.

The empirical center-outward distribution function couples the sample with
an augmented grid so that the total squared Euclidean distance is minimal.
Three solvers are provided:

* :func:`lsap_brute_force`, exhaustive search used as a test oracle;
* :func:`lsap_hungarian`, shortest augmenting paths on real costs;
* :func:`lsap_gabow_tarjan`, bit-scaling on integer costs, combining
  maximal sets of augmenting paths with Hungarian searches per stage.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import permutations
from os import PathLike
from typing import Literal

import numpy as np

from . import _lsap
from .grid import AugmentedGrid

Solver = Literal["hungarian", "gabow_tarjan"]

DEFAULT_SCALE = 2**20
_INT64_MAX = np.iinfo(np.int64).max


class AssignmentError(ValueError):
    """Invalid assignment problem input."""


@dataclass(frozen=True)
class Assignment:
    """Optimal bijection ``i -> perm[i]`` between rows and columns.

    ``row_duals`` and ``col_duals`` certify optimality when present:
    ``row_duals[i] + col_duals[j] <= costs[i, j]`` with equality on matched
    pairs.
    """

    perm: np.ndarray
    total_cost: float
    row_duals: np.ndarray | None = None
    col_duals: np.ndarray | None = None

    def to_json(self) -> str:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return json.dumps(
            {
                "perm": arr(self.perm),
                "total_cost": self.total_cost,
                "row_duals": arr(self.row_duals),
                "col_duals": arr(self.col_duals),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Assignment":
        data = json.loads(text)

        def arr(a, dtype=None):
            return None if a is None else np.asarray(a, dtype=dtype)

        return cls(
            perm=arr(data["perm"], np.int64),
            total_cost=data["total_cost"],
            row_duals=arr(data["row_duals"]),
            col_duals=arr(data["col_duals"]),
        )


@dataclass(frozen=True)
class CenterOutwardScores:
    """Empirical center-outward values, ranks and signs of a sample."""

    values: np.ndarray
    ranks: np.ndarray
    signs: np.ndarray
    assignment: Assignment


def _check_costs(costs) -> np.ndarray:
    c = np.asarray(costs, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise AssignmentError(f"cost matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise AssignmentError("cost matrix contains NaN or infinite entries")
    if np.any(c < 0):
        raise AssignmentError("cost matrix contains negative entries")
    return c


def total_cost(costs: np.ndarray, perm: np.ndarray) -> float:
    """Correctly rounded ``sum_i costs[i, perm[i]]``."""
    return math.fsum(np.asarray(costs, dtype=float)[np.arange(len(perm)), perm].tolist())


def squared_distance_costs(samples: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """``costs[i, j] = ||samples[i] - targets[j]||**2``, clipped at zero."""
    x = np.asarray(samples, dtype=float)
    g = np.asarray(targets, dtype=float)
    costs = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(g * g, axis=1)[None, :]
        - 2.0 * x @ g.T
    )
    return np.maximum(costs, 0.0)


def lsap_brute_force(costs) -> Assignment:
    """Exhaustive minimization over all ``n!`` permutations (``n <= 9``).

    Ties go to the lexicographically smallest permutation.
    """
    c = _check_costs(costs)
    n = c.shape[0]
    if n > 9:
        raise AssignmentError(f"brute force is limited to n <= 9, got n={n}")
    if n == 0:
        return Assignment(perm=np.zeros(0, dtype=np.int64), total_cost=0.0)
    perms = np.array(list(permutations(range(n))), dtype=np.int64)
    sums = c[np.arange(n), perms].sum(axis=1)
    # float sums are only a pre-filter; exact ties are settled with fsum
    cand = np.flatnonzero(sums <= sums.min() * (1 + 1e-12) + 1e-300)
    exact = [total_cost(c, perms[k]) for k in cand]
    best = cand[int(np.argmin(exact))]
    perm = perms[best]
    return Assignment(perm=perm, total_cost=total_cost(c, perm))


def lsap_hungarian(costs) -> Assignment:
    """Exact assignment by shortest augmenting paths in ``O(n^3)``.

    Rows are inserted in index order and ties among candidate columns go to
    the smallest index, so the returned permutation is deterministic.  The
    dual potentials from the solve are returned as the optimality
    certificate.
    """
    c = _check_costs(costs)
    if c.shape[0] == 0:
        return Assignment(perm=np.zeros(0, dtype=np.int64), total_cost=0.0)
    perm, u, v = _lsap.hungarian_kernel(np.ascontiguousarray(c))
    return Assignment(perm=perm, total_cost=total_cost(c, perm), row_duals=u, col_duals=v)


def quantize_costs(costs, scale: int) -> tuple[np.ndarray, int]:
    """Round ``costs * scale`` half away from zero to int64.

    The optimum of the quantized problem, divided by ``scale``, is within
    ``n / scale`` of the real-valued optimum (each entry moves by at most
    ``1 / (2 scale)``).

    Returns
    -------
    (ndarray of int64, int)
        The integer matrix and its largest entry ``N``.
    """
    if int(scale) != scale or scale < 1:
        raise AssignmentError(f"scale must be a positive integer, got {scale}")
    c = np.asarray(costs, dtype=float)
    if not np.all(np.isfinite(c)):
        raise AssignmentError("cost matrix contains NaN or infinite entries")
    scaled = c * float(scale)
    if np.any(np.abs(scaled) >= 2.0**62):
        raise AssignmentError(
            f"scaled costs exceed the 64-bit integer range (max {np.abs(scaled).max():.3g})"
        )
    q = (np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)).astype(np.int64)
    return q, int(q.max()) if q.size else 0


def lsap_gabow_tarjan(costs, max_cost: int | None = None) -> Assignment:
    """Exact assignment on integer costs by bit scaling.

    Costs are multiplied by ``n + 1`` and revealed one binary digit per
    stage.  Each stage starts from an empty matching with doubled duals and
    finds a 1-optimal matching by alternating (I) a depth-first search for a
    maximal set of vertex-disjoint augmenting paths in the admissible graph
    and (II) a Hungarian search that shifts duals until a new augmenting
    path appears.  A 1-optimal matching for the ``(n + 1)``-scaled costs is
    optimal for the original ones.  Exact integer duals for the original
    costs are then recovered from the matching and returned as the
    certificate.

    Parameters
    ----------
    costs : array_like of int
        Square matrix of non-negative integers.
    max_cost : int, optional
        Upper bound ``N`` on the entries; defaults to the observed maximum.
    """
    c = np.asarray(costs)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise AssignmentError(f"cost matrix must be square, got shape {c.shape}")
    if c.dtype.kind == "f":
        if not np.all(np.isfinite(c)) or np.any(c != np.round(c)):
            raise AssignmentError("Gabow-Tarjan requires integer costs")
        c = c.astype(np.int64)
    elif c.dtype.kind not in "iu":
        raise AssignmentError(f"Gabow-Tarjan requires integer costs, got dtype {c.dtype}")
    c = np.ascontiguousarray(c, dtype=np.int64)
    n = c.shape[0]
    if n == 0:
        return Assignment(perm=np.zeros(0, dtype=np.int64), total_cost=0.0)
    if np.any(c < 0):
        raise AssignmentError("cost matrix contains negative entries")
    N = int(c.max()) if max_cost is None else int(max_cost)
    if N < int(c.max()):
        raise AssignmentError(f"max_cost={N} is below the largest entry {int(c.max())}")
    if (n + 1) * max(N, 1) * n >= _INT64_MAX:
        raise AssignmentError(
            f"(n+1)*N*n = {(n + 1) * N * n} overflows 64-bit integers "
            f"(n={n}, N={N}); use a smaller quantization scale"
        )
    scaled = c * (n + 1)
    nbits = max(1, int(scaled.max()).bit_length())
    row_mate, _ = _lsap.gabow_tarjan_kernel(scaled, nbits)
    perm = row_mate.astype(np.int64)
    start = np.zeros(n, dtype=np.int64)
    alpha, beta, unstable = _lsap.exact_duals(c, perm, start)
    if unstable:
        raise RuntimeError("Gabow-Tarjan returned a non-optimal matching")
    return Assignment(
        perm=perm,
        total_cost=float(c[np.arange(n), perm].sum()),
        row_duals=alpha,
        col_duals=beta,
    )


def check_certificate(costs, assignment: Assignment, atol: float = 1e-9) -> bool:
    """Complementary slackness check in ``O(n^2)``."""
    c = np.asarray(costs, dtype=float)
    if assignment.row_duals is None or assignment.col_duals is None:
        raise ValueError("assignment carries no duals")
    a = np.asarray(assignment.row_duals, dtype=float)
    b = np.asarray(assignment.col_duals, dtype=float)
    tol = atol * max(1.0, float(np.abs(c).max(initial=0.0)))
    reduced = c - a[:, None] - b[None, :]
    if reduced.min(initial=0.0) < -tol:
        return False
    matched = reduced[np.arange(c.shape[0]), assignment.perm]
    return bool(np.all(np.abs(matched) <= tol))


def solve(costs, solver: Solver = "hungarian", scale: int = DEFAULT_SCALE) -> Assignment:
    """Dispatch to a solver; ``gabow_tarjan`` quantizes real costs by ``scale``."""
    if solver == "hungarian":
        return lsap_hungarian(costs)
    if solver == "gabow_tarjan":
        c = _check_costs(costs)
        q, N = quantize_costs(c, scale)
        res = lsap_gabow_tarjan(q, N)
        return Assignment(
            perm=res.perm,
            total_cost=total_cost(c, res.perm),
            row_duals=res.row_duals / scale,
            col_duals=res.col_duals / scale,
        )
    raise ValueError(f"unknown solver {solver!r}")


def center_outward(
    samples,
    grid: AugmentedGrid,
    solver: Solver = "hungarian",
    scale: int = DEFAULT_SCALE,
) -> CenterOutwardScores:
    """Empirical center-outward values, ranks and signs of ``samples``.

    Parameters
    ----------
    samples : array_like of shape (n, d)
        One observation per row; a 1-D array is read as ``d = 1``.
    grid : AugmentedGrid
        Target grid with ``n`` points in dimension ``d``.
    solver : {"hungarian", "gabow_tarjan"}
        LSAP solver; Gabow-Tarjan works on costs rounded at ``1 / scale``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != grid.d:
        raise ValueError(f"sample dimension {x.shape[1]} != grid dimension {grid.d}")
    if x.shape[0] != grid.n:
        raise ValueError(f"sample size {x.shape[0]} != grid size {grid.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain NaN or infinite values")

    res = solve(squared_distance_costs(x, grid.points), solver, scale)
    values = grid.points[res.perm]
    norms = np.linalg.norm(values, axis=1)
    ranks = (grid.spec.n_R + 1) * norms
    signs = np.zeros_like(values)
    nz = norms > 0
    signs[nz] = values[nz] / norms[nz, None]
    return CenterOutwardScores(values=values, ranks=ranks, signs=signs, assignment=res)


def dump_assignment(assignment: Assignment, path: str | PathLike) -> None:
    """Debug dump of the permutation and duals as JSON."""
    with open(path, "w") as fh:
        fh.write(assignment.to_json())
