"""
Limiting and finite-sample null distributions of the rank statistic.

Under independence the statistic converges to ``sum_k lam_k (xi_k^2 - 1)``
where the weights are products of the (negative) eigenvalues of the
centered distance kernel on the two unit balls.  The eigenvalues are
estimated from double-centered distance matrices on origin-free grids
(closed form ``-4 / (pi^2 j^2)`` in dimension one), the CDF of the weighted
centered chi-square sum is obtained by Imhof-type characteristic function
inversion, and quantiles by root finding.

Because the statistic is distribution-free, its exact null law for a given
``n`` is also available by Monte Carlo: randomly pair the two grids and
evaluate ``n * dCov^2_n``.
"""
from __future__ import annotations

import json
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import integrate, linalg, optimize
from scipy.spatial.distance import pdist, squareform
from scipy.stats import chi2

from .dcov import distance_matrix, permuted_statistics
from .grid import DirectionMode, ball_grid, default_direction_mode, make_grid

logger = logging.getLogger(__name__)

GENERATOR_VERSION = "1"
DEFAULT_M_R = 60
DEFAULT_M_S = 60
#: Grid used for dimensions above 3, where angular resolution dominates.
HIGH_DIM_M_R = 20
HIGH_DIM_M_S = 360
DEFAULT_K = 100_000
CACHE_ENV = "RANKDCOV_CACHE"

_SERIES_CUTOFF = 0.05


class IntegrationError(RuntimeError):
    """Characteristic-function inversion did not reach the requested accuracy."""

    def __init__(self, message: str, error_bound: float):
        super().__init__(f"{message} (achieved error bound {error_bound:.3g})")
        self.error_bound = error_bound


@dataclass(frozen=True)
class Spectrum:
    """Non-zero eigenvalues of the centered distance kernel on the unit ball.

    ``eigenvalues`` are negative and sorted by decreasing magnitude.
    ``mean_distance`` is the average of all ``M^2`` grid distances (``nan``
    for the closed form); the eigenvalues sum to its negative.
    """

    dim: int
    M_R: int
    M_S: int
    eigenvalues: np.ndarray
    closed_form: bool
    mean_distance: float = math.nan
    directions: str = ""
    seed: int | None = None


@dataclass(frozen=True)
class ProductSpectrum:
    """Leading ``K`` positive products of two spectra, in descending order.

    ``tail_sum`` and ``tail_sq_sum`` hold the first and second power sums
    of the products dropped by the truncation.
    """

    lambdas: np.ndarray
    K: int
    tail_sum: float = 0.0
    tail_sq_sum: float = 0.0

    @property
    def tail_variance(self) -> float:
        """Variance of the truncated part of the series."""
        return 2.0 * self.tail_sq_sum


# --------------------------------------------------------------------------
# spectra


def closed_form_eigenvalues(count: int) -> np.ndarray:
    j = np.arange(1, count + 1, dtype=float)
    return -4.0 / (math.pi**2 * j**2)


def grid_spectrum_matrix(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Eigenvalues of ``H D H / M`` for the grid distance matrix ``D``.

    Returns all ``M`` eigenvalues in ascending order and the mean distance.
    """
    M = points.shape[0]
    d = squareform(pdist(points))
    mean_distance = float(d.mean())
    d -= d.mean(axis=0)[None, :]
    d -= d.mean(axis=1)[:, None]
    d /= M
    try:
        w = linalg.eigvalsh(d, overwrite_a=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise RuntimeError(f"symmetric eigensolver failed for M={M}: {exc}") from exc
    return w, mean_distance


def default_spectrum_grid(p: int) -> tuple[int, int]:
    """``(M_R, M_S)`` used when none is given.

    Sixty random directions cannot resolve the angular part of the kernel
    beyond three dimensions; there the grid trades radii for directions.
    """
    if p <= 3:
        return DEFAULT_M_R, DEFAULT_M_S
    return HIGH_DIM_M_R, HIGH_DIM_M_S


def spectrum(
    p: int,
    M_R: int | None = None,
    M_S: int | None = None,
    mode: DirectionMode | None = None,
    seed: int = 0,
    method: str = "auto",
) -> Spectrum:
    """Eigenvalues of the centered distance kernel under the uniform law on
    the ``p``-dimensional unit ball.

    Parameters
    ----------
    p : int
        Dimension.
    M_R, M_S : int, optional
        Radii and direction counts of the origin-free grid (``M = M_R M_S``);
        see :func:`default_spectrum_grid`.
    mode : {"deterministic", "randomized"}, optional
        Direction construction; the default depends on ``p``.
    seed : int
        Seed for randomized directions.
    method : {"auto", "closed_form", "matrix"}
        ``auto`` uses the closed form for ``p = 1`` and the matrix route
        otherwise.  The matrix route for ``p = 1`` uses ``M / 2`` radii on
        each side of the origin.

    Returns
    -------
    Spectrum
        ``M - 1`` negative eigenvalues, largest magnitude first.
    """
    if p < 1:
        raise ValueError(f"dimension must be >= 1, got {p}")
    d_R, d_S = default_spectrum_grid(p)
    M_R = d_R if M_R is None else M_R
    M_S = d_S if M_S is None else M_S
    if M_R < 2 or M_S < 2:
        raise ValueError(f"need M_R, M_S >= 2, got {M_R}, {M_S}")
    if method not in ("auto", "closed_form", "matrix"):
        raise ValueError(f"unknown method {method!r}")
    M = M_R * M_S
    if method == "closed_form" or (method == "auto" and p == 1):
        if p != 1:
            raise ValueError("closed-form eigenvalues exist only for p = 1")
        return Spectrum(
            dim=1, M_R=M_R, M_S=M_S, eigenvalues=closed_form_eigenvalues(M - 1),
            closed_form=True,
        )

    if p == 1:
        if M % 2:
            raise ValueError(f"p=1 matrix route needs an even M, got {M}")
        grid = ball_grid(1, M // 2, 2)
        directions = "axis"
    else:
        mode = mode or default_direction_mode(p)
        grid = ball_grid(p, M_R, M_S, mode=mode, seed=seed)
        directions = "deterministic" if grid.spec.direction_factors else "randomized"
    w, mean_distance = grid_spectrum_matrix(grid.points)
    # the constant vector spans the null space; drop the eigenvalue nearest 0
    zero = int(np.argmin(np.abs(w)))
    eig = np.delete(w, zero)
    if np.any(eig >= 0):
        raise RuntimeError(
            f"expected negative eigenvalues, found max {eig.max():.3g} (p={p}, M={M})"
        )
    return Spectrum(
        dim=p, M_R=M_R, M_S=M_S, eigenvalues=np.sort(eig), closed_form=False,
        mean_distance=mean_distance, directions=directions,
        seed=seed if directions == "randomized" else None,
    )


@lru_cache(maxsize=32)
def _cached_spectrum(p, M_R, M_S, mode, seed) -> Spectrum:
    return spectrum(p, M_R, M_S, mode, seed)


def product_spectrum(sp_p: Spectrum, sp_q: Spectrum, K: int = DEFAULT_K) -> ProductSpectrum:
    """All pairwise products, sorted descending and truncated to ``K``."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    a = np.abs(sp_p.eigenvalues)
    b = np.abs(sp_q.eigenvalues)
    prod = np.multiply.outer(a, b).ravel()
    total = float(a.sum() * b.sum())
    total_sq = float((a * a).sum() * (b * b).sum())
    if K < prod.size:
        top = np.partition(prod, prod.size - K)[prod.size - K:]
    else:
        top = prod
    top = np.sort(top)[::-1]
    kept = float(top.sum())
    kept_sq = float((top * top).sum())
    return ProductSpectrum(
        lambdas=top,
        K=int(top.size),
        tail_sum=max(total - kept, 0.0),
        tail_sq_sum=max(total_sq - kept_sq, 0.0),
    )


# --------------------------------------------------------------------------
# weighted centered chi-square law


class _Integrand:
    """``sin(theta(u)) / (u rho(u))`` for the centered quadratic form.

    Weights that stay below ``_SERIES_CUTOFF / u_max`` are folded into
    power sums, using the Taylor series of ``arctan(z) - z`` and
    ``log(1 + z^2)`` (exact to rounding for ``z <= 0.05``).
    """

    def __init__(self, lambdas: np.ndarray, tail_variance: float, u_max: float):
        lam = np.asarray(lambdas, dtype=float)
        small = lam * u_max <= _SERIES_CUTOFF
        self.big = lam[~small]
        s = lam[small]
        self.p = {k: float(np.sum(s**k)) for k in (2, 3, 4, 5, 6, 7, 8, 9, 10, 11)}
        self.tail_variance = tail_variance

    def parts(self, u):
        u = np.asarray(u, dtype=float)
        lu = np.multiply.outer(u, self.big)
        theta = 0.5 * np.sum(np.arctan(lu) - lu, axis=-1)
        logrho = 0.25 * np.sum(np.log1p(lu * lu), axis=-1)
        p = self.p
        u2 = u * u
        theta += 0.5 * u * u2 * (
            -p[3] / 3 + u2 * (p[5] / 5 + u2 * (-p[7] / 7 + u2 * (p[9] / 9 - u2 * p[11] / 11)))
        )
        logrho += 0.25 * u2 * (
            p[2] + u2 * (-p[4] / 2 + u2 * (p[6] / 3 + u2 * (-p[8] / 4 + u2 * p[10] / 5)))
        )
        logrho += self.tail_variance * u2 / 8.0
        return theta, logrho

    def __call__(self, u, x):
        theta, logrho = self.parts(u)
        return np.sin(theta - 0.5 * x * u) / (u * np.exp(logrho))


def _envelope(lam: np.ndarray, tail_variance: float, u: float) -> float:
    lu = lam * u
    return math.exp(-0.25 * float(np.sum(np.log1p(lu * lu))) - tail_variance * u * u / 8.0) / u


def _upper_limit(lam: np.ndarray, tail_variance: float, target: float) -> float:
    # oscillation makes the neglected tail of order envelope / frequency
    u = 1.0 / max(float(lam[0]), 1e-300)
    while _envelope(lam, tail_variance, u) >= target:
        u *= 1.25
    return u


def _as_weights(lambdas) -> tuple[np.ndarray, float]:
    if isinstance(lambdas, ProductSpectrum):
        return np.asarray(lambdas.lambdas, dtype=float), lambdas.tail_variance
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    return lam, 0.0


def _prepare(lam: np.ndarray, tail_variance: float):
    if lam.size == 0:
        raise ValueError("need at least one weight")
    if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise ValueError("weights must be positive and finite")
    lam = np.sort(lam)[::-1]
    u_max = _upper_limit(lam, tail_variance, 1e-8)
    return lam, u_max, _Integrand(lam, tail_variance, u_max)


def _imhof(integrand: _Integrand, x: float, u_max: float, total: float) -> tuple[float, float]:
    # split [0, u_max] into panels of a few oscillation periods
    freq = 0.5 * (abs(x) + total) + 1e-3
    width = min(u_max, 8.0 * math.pi / freq)
    edges = np.linspace(0.0, u_max, int(math.ceil(u_max / width)) + 1)
    val = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(lambda u: float(integrand(u, x)), a, b, limit=200, epsabs=1e-9, epsrel=1e-9)
        val += v
        err += e
    return 0.5 - val / math.pi, err / math.pi


def cdf_weighted_chisq(lambdas, x, *, tail_variance: float | None = None, atol: float = 1e-4):
    """``P(sum_k lam_k (xi_k^2 - 1) <= x)`` by characteristic-function inversion.

    Parameters
    ----------
    lambdas : ProductSpectrum or array_like
        Positive weights.  A :class:`ProductSpectrum` also contributes the
        variance of its truncated tail as an independent Gaussian term.
    x : float or array_like
        Evaluation point(s).
    tail_variance : float, optional
        Overrides the Gaussian tail variance.
    atol : float
        Required absolute accuracy; :class:`IntegrationError` is raised when
        the quadrature error estimate exceeds it.
    """
    lam, tv = _as_weights(lambdas)
    if tail_variance is not None:
        tv = float(tail_variance)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if lam.size == 1 and tv == 0:
        out = chi2.cdf(xs / lam[0] + 1.0, df=1)
        return out if np.ndim(x) else float(out[0])

    lam, u_max, f = _prepare(lam, tv)
    total = float(lam.sum())
    out = np.empty_like(xs)
    for k, xv in enumerate(xs):
        if tv == 0 and xv <= -total:
            out[k] = 0.0
            continue
        val, err = _imhof(f, float(xv), u_max, total)
        if err > atol:
            raise IntegrationError(f"CDF inversion at x={xv} did not converge", err)
        out[k] = min(max(val, 0.0), 1.0)
    return out if np.ndim(x) else float(out[0])


def quantile_weighted_chisq(lambdas, prob: float, *, tail_variance: float | None = None) -> float:
    """Smallest ``x`` with ``CDF(x) >= prob``, by bracketing and root finding.

    The returned point satisfies ``|CDF(x) - prob| <= 2e-4``.
    """
    if not 0.0 < prob < 1.0:
        raise ValueError(f"prob must lie in (0, 1), got {prob}")
    lam, tv = _as_weights(lambdas)
    if tail_variance is not None:
        tv = float(tail_variance)
    if lam.size == 1 and tv == 0:
        return float(lam[0] * (chi2.ppf(prob, df=1) - 1.0))

    lam, u_max, f = _prepare(lam, tv)
    total = float(lam.sum())
    sd = math.sqrt(2.0 * float(np.sum(lam * lam)) + tv)

    def g(x):
        val, err = _imhof(f, x, u_max, total)
        if err > 1e-4:
            raise IntegrationError(f"CDF inversion at x={x} did not converge", err)
        return min(max(val, 0.0), 1.0) - prob

    lo = -total - (8.0 * math.sqrt(tv) if tv > 0 else 0.0)
    hi = sd
    for _ in range(60):
        if g(hi) >= 0:
            break
        lo, hi = hi, hi + 2.0 * sd
    else:
        raise RuntimeError(f"could not bracket the {prob} quantile")
    if g(lo) > 0:
        raise RuntimeError(f"lower bracket {lo} already exceeds prob={prob}")
    root = optimize.brentq(g, lo, hi, xtol=1e-7, rtol=1e-10)
    resid = abs(g(root))
    if resid > 2e-4:
        raise RuntimeError(f"quantile residual {resid:.3g} exceeds 2e-4")
    return float(root)


# --------------------------------------------------------------------------
# critical values and their cache


def default_cache_path() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "rankdcov" / "critical_values.jsonl"


def _grid_field(v) -> int | str:
    return "auto" if v is None or v == "auto" else int(v)


def _record_key(rec: dict) -> tuple:
    return (
        int(rec["p"]), int(rec["q"]), round(float(rec["alpha"]), 12), str(_grid_field(rec["M_R"])),
        str(_grid_field(rec["M_S"])), int(rec["K"]), str(rec.get("generator_version")),
    )


class CriticalValueCache:
    """Line-delimited JSON store of computed critical values.

    Records are ``{p, q, alpha, M_R, M_S, K, value, generator_version}`` with
    ``p <= q``; ``M_R = M_S = "auto"`` marks the dimension-dependent default
    grids.  Lookups consult the user file first and then, when
    ``use_shipped`` is set, the table bundled with the package.  I/O errors
    are downgraded to warnings.
    """

    def __init__(self, path: str | os.PathLike | None = None, use_shipped: bool = True):
        self.path = Path(path) if path is not None else default_cache_path()
        self.use_shipped = use_shipped
        self._records: dict[tuple, float] | None = None

    def _load(self) -> dict[tuple, float]:
        if self._records is not None:
            return self._records
        records: dict[tuple, float] = {}
        sources = []
        if self.use_shipped:
            sources.append(resources.files("rankdcov") / "data" / "critical_values.jsonl")
        sources.append(self.path)
        for src in sources:
            try:
                if not src.is_file():
                    continue
                for line in src.read_text().splitlines():
                    if line.strip():
                        rec = json.loads(line)
                        records[_record_key(rec)] = float(rec["value"])
            except (OSError, ValueError, KeyError) as exc:
                warnings.warn(f"could not read critical value cache {src}: {exc}")
        self._records = records
        return records

    def get(self, p, q, alpha, M_R, M_S, K) -> float | None:
        p, q = sorted((p, q))
        rec = dict(p=p, q=q, alpha=alpha, M_R=M_R, M_S=M_S, K=K, generator_version=GENERATOR_VERSION)
        return self._load().get(_record_key(rec))

    def put(self, p, q, alpha, M_R, M_S, K, value) -> None:
        p, q = sorted((p, q))
        rec = dict(p=p, q=q, alpha=alpha, M_R=_grid_field(M_R), M_S=_grid_field(M_S), K=K, value=value,
                   generator_version=GENERATOR_VERSION)
        self._load()[_record_key(rec)] = float(value)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(json.dumps(rec) + "\n")
        except OSError as exc:
            warnings.warn(f"could not write critical value cache {self.path}: {exc}")


_default_cache: CriticalValueCache | None = None


def _get_default_cache() -> CriticalValueCache:
    global _default_cache
    if _default_cache is None or _default_cache.path != default_cache_path():
        _default_cache = CriticalValueCache()
    return _default_cache


#: Number of eigen-decompositions performed in this process.
spectral_solves = 0


def null_weights(p: int, q: int, M_R: int | None = None, M_S: int | None = None,
                 K: int = DEFAULT_K) -> ProductSpectrum:
    """Product spectrum of the limiting null law for dimensions ``(p, q)``."""
    global spectral_solves
    before = _cached_spectrum.cache_info().misses
    out = _cached_product(p, q, M_R, M_S, K)
    spectral_solves += _cached_spectrum.cache_info().misses - before
    return out


@lru_cache(maxsize=16)
def _cached_product(p, q, M_R, M_S, K) -> ProductSpectrum:
    sp_p = _cached_spectrum(p, M_R, M_S, None, 0)
    sp_q = _cached_spectrum(q, M_R, M_S, None, 0)
    return product_spectrum(sp_p, sp_q, K)


def critical_value(
    p: int,
    q: int,
    alpha: float,
    M_R: int | None = None,
    M_S: int | None = None,
    K: int = DEFAULT_K,
    cache: CriticalValueCache | None | bool = None,
) -> float:
    """Asymptotic critical value ``Q_{1-alpha}`` for dimensions ``(p, q)``.

    ``M_R`` and ``M_S`` default to :func:`default_spectrum_grid` for each
    dimension separately.  ``cache=None`` uses the default cache, ``False``
    disables caching.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if cache is None:
        cache = _get_default_cache()
    if cache:
        hit = cache.get(p, q, alpha, M_R, M_S, K)
        if hit is not None:
            return hit
    weights = null_weights(min(p, q), max(p, q), M_R, M_S, K)
    value = quantile_weighted_chisq(weights, 1.0 - alpha)
    logger.info("critical value p=%d q=%d alpha=%g: %.6f", p, q, alpha, value)
    if cache:
        cache.put(p, q, alpha, M_R, M_S, K, value)
    return value


def null_pvalue(statistic: float, p: int, q: int, M_R: int | None = None,
                M_S: int | None = None, K: int = DEFAULT_K) -> float:
    """Upper tail probability of the limiting null law at ``statistic``."""
    weights = null_weights(min(p, q), max(p, q), M_R, M_S, K)
    return float(1.0 - cdf_weighted_chisq(weights, statistic))


#: stated rounding accuracy of the published table
PUBLISHED_ACCURACY = 5e-3


@lru_cache(maxsize=1)
def published_critical_values() -> dict[tuple[float, int, int], float]:
    """Published ``Q_{1-alpha}`` for ``p, q <= 10`` and ``alpha in {0.1, 0.05, 0.01}``.

    Keys are ``(alpha, p, q)``.  Values are rounded to three decimals.
    """
    text = (resources.files("rankdcov") / "data" / "published_critical_values.csv").read_text()
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    out = {}
    for row in rows[1:]:
        alpha, p, q, value = row.split(",")
        out[(float(alpha), int(p), int(q))] = float(value)
    return out


# --------------------------------------------------------------------------
# Monte Carlo null


@dataclass(frozen=True)
class MonteCarloNull:
    """Sorted replicate values of the statistic under independence."""

    values: np.ndarray
    n: int
    p: int
    q: int
    seed: int | None

    def quantile(self, prob: float) -> float:
        """``inf{x : F_reps(x) >= prob}`` of the empirical law."""
        return float(np.quantile(self.values, prob, method="inverted_cdf"))

    def pvalue(self, statistic: float) -> float:
        """``(1 + #{null >= statistic}) / (reps + 1)``."""
        count = len(self.values) - np.searchsorted(self.values, statistic, side="left")
        return float((1 + count) / (len(self.values) + 1))

    def bootstrap_ci(self, prob: float, level: float = 0.95, B: int = 1000, seed=0):
        """Percentile bootstrap interval for the ``prob`` quantile."""
        rng = np.random.default_rng(seed)
        v = self.values
        boot = np.quantile(rng.choice(v, size=(B, v.size)), prob, axis=1, method="inverted_cdf")
        lo, hi = np.quantile(boot, [(1 - level) / 2, (1 + level) / 2])
        return float(lo), float(hi)


def replicate_rngs(seed, reps: int) -> list[np.random.Generator]:
    """Independent per-replicate generators derived from ``(seed, index)``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(reps)]


def monte_carlo_null(
    n: int,
    p: int,
    q: int,
    reps: int = 1000,
    seed=0,
    mode_x: DirectionMode | None = None,
    mode_y: DirectionMode | None = None,
    grid_seed: int = 0,
    workers: int = 1,
) -> MonteCarloNull:
    """Exact-``n`` null law of the statistic by random pairing of grids.

    Under independence the two vectors of center-outward values are
    independent uniform permutations of their grids, so a replicate is
    ``n * dCov^2_n`` of the ``X`` grid against a randomly permuted ``Y``
    grid; no data are simulated and no assignment problem is solved.
    Replicate ``i`` draws its permutation from the stream ``(seed, i)``,
    so the result does not depend on ``workers``.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    gx = make_grid(n, p, mode_x, seed=grid_seed)
    gy = make_grid(n, q, mode_y, seed=grid_seed + 1)
    a = distance_matrix(gx.points)
    b = distance_matrix(gy.points)
    perms = [rng.permutation(n) for rng in replicate_rngs(seed, reps)]
    if workers > 1 and reps > 1:
        chunks = np.array_split(np.arange(reps), workers)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda idx: permuted_statistics(a, b, [perms[i] for i in idx]), chunks))
        values = np.concatenate(parts)
    else:
        values = permuted_statistics(a, b, perms)
    return MonteCarloNull(values=np.sort(values), n=n, p=p, q=q, seed=seed)


__all__ = [
    "CriticalValueCache",
    "IntegrationError",
    "MonteCarloNull",
    "ProductSpectrum",
    "Spectrum",
    "cdf_weighted_chisq",
    "closed_form_eigenvalues",
    "critical_value",
    "monte_carlo_null",
    "null_pvalue",
    "null_weights",
    "product_spectrum",
    "published_critical_values",
    "quantile_weighted_chisq",
    "spectrum",
]
