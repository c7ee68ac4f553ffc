"""
Augmented grids on the closed unit ball.

An augmented grid with ``n`` points is made of ``n_R`` concentric spheres
with radii ``j / (n_R + 1)``, intersected with ``n_S`` rays through unit
vectors, plus ``n_0`` copies of the origin.  The grid is the transport
target used to define center-outward ranks and signs.

Directions on the sphere can be produced deterministically (spherical
coordinates whose marginals are inverted sine-power integrals, so that the
discrete uniform law on the points approximates the uniform law on the
sphere) or by sampling normalized Gaussian vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from os import PathLike
from typing import Literal, Sequence

import numpy as np
from scipy.special import comb, gammaln

DirectionMode = Literal["deterministic", "randomized"]

#: Dimensions up to this value use deterministic directions by default.
DETERMINISTIC_MAX_DIM = 3

_BISECT_MAXITER = 200


@dataclass(frozen=True)
class GridSpec:
    """Factorization ``n = n_R * n_S + n_0`` governing an augmented grid."""

    d: int
    n: int
    n_R: int
    n_S: int
    n_0: int
    direction_factors: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.n_R < 1 or self.n_S < 1 or self.n_0 < 0:
            raise ValueError(f"invalid factor counts in {self}")
        if self.n != self.n_R * self.n_S + self.n_0:
            raise ValueError(
                f"n={self.n} != n_R*n_S+n_0={self.n_R * self.n_S + self.n_0}"
            )
        if not self.n_0 < min(self.n_R, self.n_S):
            raise ValueError(
                f"need n_0 < min(n_R, n_S), got n_0={self.n_0}, "
                f"n_R={self.n_R}, n_S={self.n_S}"
            )
        if self.d == 1 and (self.n_S != 2 or self.n_R != self.n // 2):
            raise ValueError("d=1 requires n_S=2 and n_R=floor(n/2)")
        if self.direction_factors and math.prod(self.direction_factors) != self.n_S:
            raise ValueError(
                f"direction factors {self.direction_factors} do not multiply "
                f"to n_S={self.n_S}"
            )


@dataclass(frozen=True)
class AugmentedGrid:
    """Multiset of ``n`` grid points in the unit ball.

    ``points`` has shape ``(n, d)``; the first ``n_0`` rows are the origin
    and the remaining rows are ``(j / (n_R + 1)) * directions[k]`` ordered
    lexicographically in ``(k, j)``.
    """

    spec: GridSpec
    points: np.ndarray
    directions: np.ndarray

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def d(self) -> int:
        return self.spec.d


def default_direction_mode(d: int) -> DirectionMode:
    return "deterministic" if d <= DETERMINISTIC_MAX_DIM else "randomized"


def _fixup(n: int, n_S: int) -> tuple[int, int, int]:
    # shrink n_S until the remainder fits below both factors; n_S = 1 always works
    while n_S > 1:
        n_R = n // n_S
        n_0 = n - n_R * n_S
        if n_R >= 1 and n_0 < min(n_R, n_S):
            return n_R, n_S, n_0
        n_S -= 1
    return n, 1, 0


def factorize(n: int, d: int, mode: DirectionMode | None = None) -> GridSpec:
    """Choose the grid factorization ``n = n_R * n_S + n_0``.

    Parameters
    ----------
    n : int
        Sample size, at least 4.
    d : int
        Dimension.
    mode : {"deterministic", "randomized"}, optional
        Direction construction the factorization is meant for.  Defaults to
        deterministic for ``d <= 3`` and randomized otherwise.

    Returns
    -------
    GridSpec
        For ``d = 1`` always ``n_S = 2``.  In randomized mode ``n_S`` starts
        at ``floor(sqrt(n))``.  In deterministic mode every direction factor
        is ``n_* = max(2, floor(n ** (1 / (2d - 2))))`` and ``n_S = n_* **
        (d - 1)``.  In both modes the factor is decremented until
        ``n_0 < min(n_R, n_S)``; for very small ``n`` this can end at a
        single direction (e.g. ``n=5, d=3`` gives ``n_S=1, n_R=5``).
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if n < 4:
        raise ValueError(f"n must be >= 4 for a valid factorization, got {n}")
    if mode is None:
        mode = default_direction_mode(d)
    if mode not in ("deterministic", "randomized"):
        raise ValueError(f"unknown direction mode {mode!r}")

    if d == 1:
        n_R = n // 2
        return GridSpec(d=1, n=n, n_R=n_R, n_S=2, n_0=n - 2 * n_R)

    if mode == "randomized":
        n_R, n_S, n_0 = _fixup(n, math.isqrt(n))
        return GridSpec(d=d, n=n, n_R=n_R, n_S=n_S, n_0=n_0)

    n_star = max(2, _integer_root(n, 2 * d - 2))
    while n_star >= 1:
        n_S = n_star ** (d - 1)
        n_R = n // n_S
        n_0 = n - n_R * n_S
        if n_R >= 1 and n_0 < min(n_R, n_S):
            break
        n_star -= 1
    return GridSpec(
        d=d, n=n, n_R=n_R, n_S=n_S, n_0=n_0, direction_factors=(n_star,) * (d - 1)
    )


def _integer_root(n: int, k: int) -> int:
    r = int(round(n ** (1.0 / k)))
    while r**k > n:
        r -= 1
    while (r + 1) ** k <= n:
        r += 1
    return r


def balanced_factors(n_S: int, k: int) -> tuple[int, ...] | None:
    """Split ``n_S`` into ``k`` ascending factors as equal as possible.

    Returns ``None`` when ``n_S`` has no such factorization with every factor
    at least 2 (for ``k > 1``).
    """
    if k == 1:
        return (n_S,)

    best: tuple[int, ...] | None = None

    def search(rest: int, slots: int, lo: int, acc: tuple[int, ...]) -> None:
        nonlocal best
        if slots == 1:
            if rest >= lo:
                cand = acc + (rest,)
                if best is None or cand[-1] / cand[0] < best[-1] / best[0]:
                    best = cand
            return
        f = lo
        while f**slots <= rest:
            if rest % f == 0:
                search(rest // f, slots - 1, f, acc + (f,))
            f += 1

    search(n_S, k, 2, ())
    return best


# --------------------------------------------------------------------------
# sine-power integrals


def wallis(m: int) -> float:
    """``int_0^pi sin(t)**m dt`` via log-gamma."""
    return math.exp(
        0.5 * math.log(math.pi) + gammaln((m + 1) / 2.0) - gammaln(m / 2.0 + 1.0)
    )


def g_m(m: int, theta):
    """Closed-form antiderivative ``int_0^theta sin(t)**m dt``.

    Uses the power-reduction expansions (odd and even ``m`` differ);
    ``g_0(theta) = theta``.  ``theta`` may be a scalar or an array in
    ``[0, pi]``.
    """
    if m < 0:
        raise ValueError(f"m must be non-negative, got {m}")
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0) or np.any(th > math.pi) or np.any(np.isnan(th)):
        raise ValueError("theta must lie in [0, pi]")
    if m % 2 == 1:
        half = (m - 1) // 2
        out = np.zeros_like(th)
        for k in range(half + 1):
            w = m - 2 * k
            out += (-1) ** (half - k) * comb(m, k, exact=True) * (1 - np.cos(w * th)) / w
        out /= 2.0 ** (m - 1)
    else:
        half = m // 2
        out = comb(m, half, exact=True) * th / 2.0**m
        acc = np.zeros_like(th)
        for k in range(half):
            w = m - 2 * k
            acc += (-1) ** (half - k) * comb(m, k, exact=True) * np.sin(w * th) / w
        out = out + acc / 2.0 ** (m - 1)
    return out if out.ndim else float(out)


def inverse_g_m(m: int, target, tol: float = 1e-12):
    """Invert :func:`g_m` on ``[0, pi]`` by bisection.

    The bracket is halved until ``|g_m(theta) - target| <= tol * g_m(pi)``
    (the derivative of ``g_m`` is at most one, so an interval of that width
    suffices), with at most 200 halvings.  Accepts scalars or arrays.
    """
    t = np.asarray(target, dtype=float)
    total = wallis(m)
    if np.any(t < 0) or np.any(t > total * (1 + 1e-14)) or np.any(np.isnan(t)):
        raise ValueError(f"target must lie in [0, g_{m}(pi)={total}]")
    lo = np.zeros_like(t)
    hi = np.full_like(t, math.pi)
    width = tol * total
    for _ in range(_BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        below = g_m(m, mid) < t
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= width):
            break
    out = 0.5 * (lo + hi)
    out = np.where(t <= 0, 0.0, out)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# directions


def spherical_to_cartesian(angles: np.ndarray, r: float | np.ndarray = 1.0) -> np.ndarray:
    """Map ``(..., d-1)`` spherical angles to ``(..., d)`` Cartesian points."""
    angles = np.atleast_2d(angles)
    k = angles.shape[-1]
    out = np.empty(angles.shape[:-1] + (k + 1,))
    sin_prod = np.ones(angles.shape[:-1])
    for m in range(k):
        out[..., m] = sin_prod * np.cos(angles[..., m])
        sin_prod = sin_prod * np.sin(angles[..., m])
    out[..., k] = sin_prod
    return np.asarray(r)[..., None] * out if np.ndim(r) else r * out


def directions_deterministic(d: int, factors: Sequence[int]) -> np.ndarray:
    """Deterministic unit vectors approximating the uniform law on the sphere.

    Parameters
    ----------
    d : int
        Ambient dimension, at least 2.
    factors : sequence of int
        ``(n_1, ..., n_{d-1})``; the result has ``prod(factors)`` rows.

    Returns
    -------
    ndarray of shape (prod(factors), d)
        Angle ``m < d - 1`` takes the values
        ``g_{d-1-m}^{-1}(g_{d-1-m}(pi) * (2j - 1) / (2 n_m))`` and the last
        angle takes ``2 pi (2j - 1) / (2 n_{d-1})``.  Rows are ordered
        lexicographically in ``(j_1, ..., j_{d-1})``.
    """
    if d < 2:
        raise ValueError(f"deterministic directions need d >= 2, got {d}")
    factors = tuple(int(f) for f in factors)
    if len(factors) != d - 1:
        raise ValueError(f"need {d - 1} factors for d={d}, got {len(factors)}")
    if any(f < 1 for f in factors):
        raise ValueError(f"factors must be >= 1, got {factors}")

    per_angle = []
    for m, n_m in enumerate(factors, start=1):
        u = (2.0 * np.arange(1, n_m + 1) - 1.0) / (2.0 * n_m)
        if m <= d - 2:
            power = d - 1 - m
            per_angle.append(inverse_g_m(power, wallis(power) * u))
        else:
            per_angle.append(2.0 * math.pi * u)
    angles = np.array(list(product(*per_angle)), dtype=float).reshape(-1, d - 1)
    out = spherical_to_cartesian(angles)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def directions_random(d: int, n_S: int, seed=None) -> np.ndarray:
    """``n_S`` i.i.d. uniform unit vectors (normalized standard Gaussians)."""
    if d < 2:
        raise ValueError(f"random directions need d >= 2, got {d}")
    if n_S < 1:
        raise ValueError(f"n_S must be >= 1, got {n_S}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_S, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def build_grid(spec: GridSpec, directions: np.ndarray | None = None) -> AugmentedGrid:
    """Assemble the augmented grid for ``spec`` on the given directions.

    For ``d = 1`` the directions are ``(+1, -1)`` and may be omitted.
    """
    if directions is None:
        if spec.d != 1:
            raise ValueError("directions are required for d >= 2")
        directions = np.array([[1.0], [-1.0]])
    directions = np.asarray(directions, dtype=float)
    if directions.ndim == 1:
        directions = directions[:, None]
    if directions.shape != (spec.n_S, spec.d):
        raise ValueError(
            f"expected directions of shape {(spec.n_S, spec.d)}, got {directions.shape}"
        )
    radii = np.arange(1, spec.n_R + 1) / (spec.n_R + 1.0)
    shells = (directions[:, None, :] * radii[None, :, None]).reshape(-1, spec.d)
    points = np.vstack([np.zeros((spec.n_0, spec.d)), shells])
    return AugmentedGrid(spec=spec, points=points, directions=directions)


def make_grid(
    n: int,
    d: int,
    mode: DirectionMode | None = None,
    seed=0,
) -> AugmentedGrid:
    """Factorize ``n`` and build the corresponding grid in one call."""
    if mode is None:
        mode = default_direction_mode(d)
    spec = factorize(n, d, mode)
    if d == 1:
        return build_grid(spec)
    if mode == "deterministic":
        return build_grid(spec, directions_deterministic(d, spec.direction_factors))
    return build_grid(spec, directions_random(d, spec.n_S, seed))


def ball_grid(
    d: int,
    n_R: int,
    n_S: int,
    mode: DirectionMode | None = None,
    seed=0,
) -> AugmentedGrid:
    """Origin-free grid with ``n_R`` radii and ``n_S`` directions.

    In deterministic mode ``n_S`` is split into ``d - 1`` balanced factors;
    if that is impossible the randomized construction is used instead.
    """
    if mode is None:
        mode = default_direction_mode(d)
    if d == 1:
        return build_grid(GridSpec(d=1, n=2 * n_R, n_R=n_R, n_S=2, n_0=0))
    factors = balanced_factors(n_S, d - 1) if mode == "deterministic" else None
    if factors is not None:
        spec = GridSpec(d=d, n=n_R * n_S, n_R=n_R, n_S=n_S, n_0=0, direction_factors=factors)
        return build_grid(spec, directions_deterministic(d, factors))
    spec = GridSpec(d=d, n=n_R * n_S, n_R=n_R, n_S=n_S, n_0=0)
    return build_grid(spec, directions_random(d, n_S, seed))


def grid_to_csv(grid: AugmentedGrid, path: str | PathLike) -> None:
    """Write one grid point per row with 17 significant digits."""
    np.savetxt(path, grid.points, fmt="%.17g", delimiter=",")


def points_from_csv(path: str | PathLike) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))
