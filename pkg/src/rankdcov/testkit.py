"""
The four competing independence tests and a size/power simulation harness.

Methods
-------
``hallin_theoretical``
    Center-outward rank statistic against the asymptotic critical value.
``hallin_montecarlo``
    Same statistic against the exact-``n`` Monte Carlo null quantile.
``rdcov_permutation``
    ``n * dCov^2_n`` of columnwise marginal ranks with a permutation threshold.
``dcov_permutation``
    ``n * dCov^2_n`` of the raw data with a permutation threshold.

All tests reject when the statistic is strictly larger than the threshold.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.special import ndtr

from . import nulldist
from .assignment import DEFAULT_SCALE, Solver
from .dcov import (
    check_pair,
    dcov_from_distances,
    distance_matrix,
    marginal_ranks,
    permuted_statistics,
    statistic_mhat,
)
from .grid import AugmentedGrid, DirectionMode, make_grid

logger = logging.getLogger(__name__)

Method = Literal["hallin_theoretical", "hallin_montecarlo", "rdcov_permutation", "dcov_permutation"]
METHODS: tuple[str, ...] = (
    "hallin_theoretical",
    "hallin_montecarlo",
    "rdcov_permutation",
    "dcov_permutation",
)
MIN_N = 8
#: below this sample size the asymptotic p-value carries an accuracy caveat
ASYMPTOTIC_CAVEAT_N = 100


@dataclass(frozen=True)
class TestConfig:
    """Options for :func:`run_test`.

    ``permutations=None`` means ``R = n``.  ``grid_seed`` seeds random
    direction sets (``X`` uses ``grid_seed``, ``Y`` uses ``grid_seed + 1``).
    ``M_R``, ``M_S`` and ``K`` control the spectrum behind the asymptotic
    threshold; ``None`` picks the dimension-dependent defaults.
    """

    __test__ = False  # not a pytest class

    method: Method = "hallin_theoretical"
    alpha: float = 0.05
    permutations: int | None = None
    mc_reps: int = 1000
    seed: int = 0
    solver: Solver = "hungarian"
    scale: int = DEFAULT_SCALE
    mode_x: DirectionMode | None = None
    mode_y: DirectionMode | None = None
    grid_seed: int = 0
    M_R: int | None = None
    M_S: int | None = None
    K: int = nulldist.DEFAULT_K

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.permutations is not None and self.permutations < 1:
            raise ValueError(f"permutations must be >= 1, got {self.permutations}")
        if self.mc_reps < 1:
            raise ValueError(f"mc_reps must be >= 1, got {self.mc_reps}")
        if self.solver not in ("hungarian", "gabow_tarjan"):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass(frozen=True)
class TestReport:
    """Outcome of one test.

    ``reject`` is ``statistic > threshold``.  Permutation and Monte Carlo
    p-values are ``(1 + #{null >= statistic}) / (R + 1)``, so ``p_value <=
    alpha`` and ``reject`` can disagree only when the statistic ties a null
    value or sits between neighbouring order statistics.
    """

    __test__ = False

    method: str
    statistic: float
    threshold: float
    p_value: float | None
    reject: bool
    n: int
    p: int
    q: int
    alpha: float
    metadata: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON has no infinity; an unreachable threshold is written as null
        if not math.isfinite(self.threshold):
            d["threshold"] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        d = dict(d)
        if d.get("threshold") is None:
            d["threshold"] = math.inf
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "TestReport":
        return cls.from_dict(json.loads(text))

    def without_time(self) -> "TestReport":
        return replace(self, wall_time=0.0)


def decide(statistic: float, threshold: float) -> bool:
    """Strict rejection rule ``statistic > threshold``."""
    return bool(statistic > threshold)


def order_statistic_index(R: int, alpha: float) -> int:
    """``ceil((1 - alpha)(R + 1))``, guarded against float round-up."""
    return math.ceil((1.0 - alpha) * (R + 1) - 1e-9)


def permutation_null(x, y, R: int, seed=0) -> np.ndarray:
    """Sorted ``n * dCov^2_n`` values over ``R`` seeded row permutations of ``y``.

    Permutation ``r`` is drawn from the stream ``(seed, r)``.
    """
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    x, y = check_pair(x, y)
    n = x.shape[0]
    perms = [rng.permutation(n) for rng in nulldist.replicate_rngs(seed, R)]
    return np.sort(permuted_statistics(distance_matrix(x), distance_matrix(y), perms))


def threshold_from_null(null_sorted: np.ndarray, alpha: float) -> float:
    """The ``ceil((1-alpha)(R+1))``-th order statistic; ``inf`` if it exceeds ``R``."""
    R = len(null_sorted)
    k = order_statistic_index(R, alpha)
    return float(null_sorted[k - 1]) if k <= R else math.inf


def permutation_pvalue(null_sorted: np.ndarray, statistic: float) -> float:
    """``(1 + #{null >= statistic}) / (R + 1)``."""
    R = len(null_sorted)
    count = R - np.searchsorted(null_sorted, statistic, side="left")
    return float((1 + count) / (R + 1))


def permutation_threshold(x, y, R: int, alpha: float, seed=0) -> float:
    """Permutation rejection threshold for ``n * dCov^2_n`` at level ``alpha``.

    Examples
    --------
    With ``R = 19`` and ``alpha = 0.05`` the threshold is the largest of the
    19 permuted values; with ``R = 1`` it is infinite, so no sample rejects.
    """
    return threshold_from_null(permutation_null(x, y, R, seed), alpha)


# --------------------------------------------------------------------------
# cached per-(n, d) objects, shared across replicates


@lru_cache(maxsize=64)
def _grid(n: int, d: int, mode, seed: int) -> AugmentedGrid:
    return make_grid(n, d, mode, seed=seed)


@lru_cache(maxsize=16)
def _mc_null(n, p, q, reps, seed, mode_x, mode_y, grid_seed) -> nulldist.MonteCarloNull:
    return nulldist.monte_carlo_null(n, p, q, reps, seed, mode_x, mode_y, grid_seed)


def _grid_meta(g: AugmentedGrid) -> dict:
    s = g.spec
    return dict(d=s.d, n=s.n, n_R=s.n_R, n_S=s.n_S, n_0=s.n_0, direction_factors=list(s.direction_factors or ()))


def run_test(x, y, config: TestConfig = TestConfig()) -> TestReport:
    """Run one independence test on the paired sample ``(x[i], y[i])``.

    Parameters
    ----------
    x, y : array_like of shape (n, p) and (n, q)
        One-dimensional inputs are read as single columns.
    config : TestConfig

    Returns
    -------
    TestReport
    """
    t0 = time.perf_counter()
    x, y = check_pair(x, y)
    n, p, q = x.shape[0], x.shape[1], y.shape[1]
    if n < MIN_N:
        raise ValueError(f"run_test needs n >= {MIN_N}, got n={n}")
    c = config
    meta: dict = {"seed": c.seed}

    if c.method in ("hallin_theoretical", "hallin_montecarlo"):
        gx = _grid(n, p, c.mode_x, c.grid_seed)
        gy = _grid(n, q, c.mode_y, c.grid_seed + 1)
        try:
            stat = statistic_mhat(x, y, gx, gy, c.solver, c.scale)
        except Exception as exc:
            raise RuntimeError(f"center-outward statistic failed (n={n}, p={p}, q={q}): {exc}") from exc
        meta.update(grid_x=_grid_meta(gx), grid_y=_grid_meta(gy), grid_seed=c.grid_seed, solver=c.solver)
        if c.solver == "gabow_tarjan":
            meta["scale"] = c.scale
        if c.method == "hallin_theoretical":
            threshold = nulldist.critical_value(p, q, c.alpha, c.M_R, c.M_S, c.K)
            p_value = nulldist.null_pvalue(stat, p, q, c.M_R, c.M_S, c.K)
            p_value = min(1.0, max(0.0, p_value))
            meta.update(M_R=c.M_R or "auto", M_S=c.M_S or "auto", K=c.K,
                        asymptotic_caveat=n < ASYMPTOTIC_CAVEAT_N)
        else:
            null = _mc_null(n, p, q, c.mc_reps, c.seed, c.mode_x, c.mode_y, c.grid_seed)
            threshold = threshold_from_null(null.values, c.alpha)
            p_value = null.pvalue(stat)
            meta.update(mc_reps=c.mc_reps)
    else:
        if c.method == "rdcov_permutation":
            x, y = marginal_ranks(x), marginal_ranks(y)
        R = c.permutations or n
        null = permutation_null(x, y, R, c.seed)
        stat = n * dcov_from_distances(distance_matrix(x), distance_matrix(y))
        threshold = threshold_from_null(null, c.alpha)
        p_value = permutation_pvalue(null, stat)
        meta.update(permutations=R)

    return TestReport(
        method=c.method,
        statistic=float(stat),
        threshold=float(threshold),
        p_value=None if p_value is None else float(p_value),
        reject=decide(stat, threshold),
        n=n,
        p=p,
        q=q,
        alpha=c.alpha,
        metadata=meta,
        wall_time=time.perf_counter() - t0,
    )


def run_all(x, y, config: TestConfig = TestConfig()) -> list[TestReport]:
    """All four methods with otherwise identical settings."""
    return [run_test(x, y, replace(config, method=m)) for m in METHODS]


# --------------------------------------------------------------------------
# data generators


def example1_covariance(p: int, q: int, tau: float, rho: float) -> np.ndarray:
    """``I + tau * L_{1,2} + rho * L_{1,p+1}`` of size ``p + q``.

    ``L_{i,j}`` is symmetric with ones at ``(i, j)`` and ``(j, i)``.  With
    ``p = 1`` there is no second ``X`` coordinate and ``tau`` must be zero.
    """
    d = p + q
    cov = np.eye(d)
    if tau != 0.0:
        if p < 2:
            raise ValueError(f"tau={tau} needs p >= 2, got p={p}")
        cov[0, 1] = cov[1, 0] = tau
    cov[0, p] = cov[p, 0] = rho
    return cov


def _cholesky(p: int, q: int, tau: float, rho: float) -> np.ndarray:
    cov = example1_covariance(p, q, tau, rho)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError(
            f"covariance is not positive definite for (tau, rho) = ({tau}, {rho})"
        ) from None


def sample_example1(n: int, p: int, q: int, tau: float, rho: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian pair with covariance :func:`example1_covariance`."""
    rng = np.random.default_rng(rng)
    z = rng.standard_normal((n, p + q)) @ _cholesky(p, q, tau, rho).T
    return z[:, :p], z[:, p:]


def sample_example2(n: int, p: int, q: int, tau: float, rho: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Example-1 Gaussians pushed coordinatewise through ``Phi`` then the Cauchy quantile."""
    x, y = sample_example1(n, p, q, tau, rho, rng)
    return _to_cauchy(x), _to_cauchy(y)


def _to_cauchy(z: np.ndarray) -> np.ndarray:
    # tan(pi (Phi(z) - 1/2)); the symmetric form keeps precision in both tails
    u = ndtr(-np.abs(z))
    return np.sign(z) / np.tan(np.pi * u)


def sample_log_square(n: int, p: int, q: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Dependent but uncorrelated pair: ``Y_j = log(X_1^2)`` plus noise.

    Pearson correlation between ``X`` and ``Y`` is zero by symmetry.
    """
    rng = np.random.default_rng(rng)
    x = rng.standard_normal((n, p))
    y = np.log(x[:, :1] ** 2) + 0.5 * rng.standard_normal((n, q))
    return x, y


SAMPLERS: dict[str, Callable] = {"1": sample_example1, "2": sample_example2}


# --------------------------------------------------------------------------
# simulation harness


@dataclass(frozen=True)
class SimulationRow:
    example: str
    tau: float
    rho: float
    p: int
    q: int
    n: int
    method: str
    alpha: float
    reps: int
    rejections: int
    rate: float
    se: float
    median_statistic: float


@dataclass(frozen=True)
class SimulationTable:
    """Rejection rates with binomial standard errors and the full config."""

    rows: list[SimulationRow]
    config: dict

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "rows": [asdict(r) for r in self.rows]}, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.config):
            buf.write(f"# {key}={json.dumps(self.config[key])}\n")
        names = list(SimulationRow.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, k)) for k in names])
        return buf.getvalue()

    def rate(self, method: str, rho: float | None = None) -> float:
        hits = [r for r in self.rows if r.method == method and (rho is None or r.rho == rho)]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match method={method!r}, rho={rho}")
        return hits[0].rate


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def replicate_seeds(seed: int, reps: int) -> list[tuple[np.random.Generator, int]]:
    """Per-replicate (data generator, test seed) pairs derived from ``seed``."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(reps):
        data_ss, test_ss = child.spawn(2)
        out.append((np.random.default_rng(data_ss), int(test_ss.generate_state(1)[0])))
    return out


def simulate(
    example: str,
    *,
    tau: float = 0.0,
    rhos: Sequence[float] = (0.0,),
    p: int = 2,
    q: int = 2,
    n: int = 216,
    reps: int = 100,
    methods: Sequence[str] = ("hallin_theoretical",),
    alpha: float = 0.05,
    seed: int = 0,
    workers: int = 1,
    base_config: TestConfig = TestConfig(),
) -> SimulationTable:
    """Rejection rates of ``methods`` on replicated samples from ``example``.

    Replicate ``i`` draws its data and its permutation seed from the stream
    ``(seed, i)``; every method sees the same data.  The Monte Carlo
    threshold is computed once per ``(n, p, q)`` with ``base_config.seed``.
    Results are aggregated in replicate order, so they do not depend on
    ``workers``.
    """
    if example not in SAMPLERS:
        raise ValueError(f"unknown example {example!r}; choose from {sorted(SAMPLERS)}")
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    sampler = SAMPLERS[example]
    for rho in rhos:
        _cholesky(p, q, tau, rho)

    rows = []
    for rho in rhos:
        seeds = replicate_seeds(seed, reps)

        def one(item):
            data_rng, test_seed = item
            x, y = sampler(n, p, q, tau, rho, data_rng)
            out = []
            for m in methods:
                cfg = replace(base_config, method=m, alpha=alpha)
                if m != "hallin_montecarlo":
                    cfg = replace(cfg, seed=test_seed)
                r = run_test(x, y, cfg)
                out.append((r.reject, r.statistic))
            return out

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(one, seeds))
        else:
            results = [one(s) for s in seeds]
        for k, m in enumerate(methods):
            rej = sum(res[k][0] for res in results)
            stats = [res[k][1] for res in results]
            rate = rej / reps
            rows.append(
                SimulationRow(
                    example=example, tau=float(tau), rho=float(rho), p=p, q=q, n=n, method=m,
                    alpha=alpha, reps=reps, rejections=int(rej), rate=rate,
                    se=math.sqrt(rate * (1 - rate) / reps), median_statistic=float(np.median(stats)),
                )
            )
        logger.info("example %s rho=%g done", example, rho)

    config = dict(
        example=example, tau=tau, rhos=list(map(float, rhos)), p=p, q=q, n=n, reps=reps,
        methods=list(methods), alpha=alpha, seed=seed,
        test_config={k: v for k, v in asdict(base_config).items() if k not in ("method", "alpha")},
    )
    return SimulationTable(rows=rows, config=config)


def simulate_example1(**kwargs) -> SimulationTable:
    """Size/power table for the Gaussian design; see :func:`simulate`."""
    return simulate("1", **kwargs)


def simulate_example2(**kwargs) -> SimulationTable:
    """Size/power table for the Cauchy-margin design; see :func:`simulate`."""
    return simulate("2", **kwargs)
