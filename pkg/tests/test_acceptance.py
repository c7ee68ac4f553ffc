"""
Acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line; the same lines are repeated in the
terminal summary under "acceptance criteria".
"""
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import ks_2samp

from rankdcov import nulldist
from rankdcov.assignment import lsap_brute_force, lsap_gabow_tarjan, lsap_hungarian
from rankdcov.dcov import dcov_fast, dcov_naive, statistic_mhat
from rankdcov.grid import make_grid
from rankdcov.nulldist import CriticalValueCache, closed_form_eigenvalues, critical_value, monte_carlo_null, spectrum
from rankdcov.testkit import (
    METHODS,
    TestConfig,
    replicate_seeds,
    run_test,
    sample_example1,
    sample_example2,
    simulate_example1,
    simulate_example2,
)

# published critical values, alpha -> {(p, q): value}
TABLE = {
    0.1: {(1, 1): 0.306, (1, 2): 0.215, (2, 2): 0.145, (3, 3): 0.090, (5, 5): 0.052, (10, 10): 0.027},
    0.05: {(1, 1): 0.490, (1, 2): 0.320, (2, 2): 0.205, (3, 3): 0.124, (5, 5): 0.070, (10, 10): 0.035},
    0.01: {(1, 1): 0.945, (1, 2): 0.563, (2, 2): 0.338, (3, 3): 0.194, (5, 5): 0.105, (10, 10): 0.052},
}


def test_c01_critical_values(record, tmp_path):
    # cold start: empty cache file, no bundled table, no in-process spectra
    nulldist._cached_spectrum.cache_clear()
    nulldist._cached_product.cache_clear()
    cache = CriticalValueCache(tmp_path / "cold.jsonl", use_shipped=False)
    devs = {}
    for alpha, entries in TABLE.items():
        for (p, q), want in entries.items():
            devs[(alpha, p, q)] = abs(critical_value(p, q, alpha, cache=cache) - want)
    worst = max(devs, key=devs.get)
    ok = devs[worst] <= 0.01
    record(1, ok, f"max |computed - published| = {devs[worst]:.4f} at alpha={worst[0]}, (p,q)={worst[1:]} (tol 0.01)")
    assert ok


def test_c02_closed_form_spectrum(record):
    sp = spectrum(1, M_R=40, M_S=50, method="matrix")  # M = 2000
    err = np.abs(sp.eigenvalues[:3] - closed_form_eigenvalues(3)).max()
    ok = err <= 1e-2
    record(2, ok, f"max error of leading 3 eigenvalues at M=2000 = {err:.2e} (tol 1e-2)")
    assert ok


def test_c03_estimator_equivalence(record):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(4, 13))
        p, q = rng.integers(1, 4, size=2)
        x, y = rng.standard_normal((n, p)), rng.standard_normal((n, q))
        a, b = dcov_naive(x, y), dcov_fast(x, y)
        worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    ok = worst <= 1e-10
    record(3, ok, f"max relative gap naive vs fast over 100 instances = {worst:.2e} (tol 1e-10)")
    assert ok


def test_c04_lsap_oracle(record):
    rng = np.random.default_rng(4)
    mismatches = 0
    for k in range(200):
        n = int(rng.integers(1, 9))
        c = rng.integers(0, [10, 1000, 10**6][k % 3], size=(n, n))
        ref = lsap_brute_force(c).total_cost
        mismatches += lsap_hungarian(c).total_cost != ref
        mismatches += lsap_gabow_tarjan(c).total_cost != ref
    ok = mismatches == 0
    record(4, ok, f"{mismatches} cost mismatches against brute force on 200 instances, n <= 8")
    assert ok


def test_c05_empirical_size(record):
    tab = simulate_example1(tau=0.0, rhos=(0.0,), p=2, q=2, n=216, reps=500,
                            methods=("hallin_theoretical",), alpha=0.05, seed=2024)
    rate = tab.rows[0].rate
    ok = 0.02 <= rate <= 0.07
    record(5, ok, f"size at n=216, (2,2), 500 reps = {rate:.3f} (se {tab.rows[0].se:.3f}; band [0.02, 0.07])")
    assert ok


def test_c06_distribution_free(record):
    n, reps = 108, 10_000
    gx, gy = make_grid(n, 2), make_grid(n, 2, seed=1)

    def null_stats(sampler, seed):
        out = np.empty(reps)
        for i, (rng, _) in enumerate(replicate_seeds(seed, reps)):
            x, y = sampler(n, 2, 2, 0.0, 0.0, rng)
            out[i] = statistic_mhat(x, y, gx, gy)
        return out

    gauss = null_stats(sample_example1, 61)
    cauchy = null_stats(sample_example2, 62)
    pv = ks_2samp(gauss, cauchy).pvalue
    ok = pv > 0.001
    record(6, ok, f"two-sample KS p-value, Gaussian vs Cauchy margins, 1e4 reps each = {pv:.3f} (need > 0.001)")
    assert ok


def test_c07_consistency(record):
    hits = {m: 0 for m in METHODS}
    for rng, test_seed in replicate_seeds(7, 100):
        x, _ = sample_example1(216, 2, 2, 0.0, 0.0, rng)
        for m in METHODS:
            hits[m] += run_test(x, x, TestConfig(method=m, seed=test_seed)).reject
    ok = min(hits.values()) >= 99
    record(7, ok, "Y = X, n=216, rejections out of 100: " + ", ".join(f"{m} {h}" for m, h in hits.items()))
    assert ok


def test_c08_theoretical_vs_monte_carlo(record):
    gaps = {}
    for p in (1, 2):
        mc = monte_carlo_null(432, p, p, reps=20_000, seed=8)
        gaps[p] = abs(critical_value(p, p, 0.05) - mc.quantile(0.95))
    ok = max(gaps.values()) <= 0.02
    record(8, ok, f"|Q_0.95 - MC quantile| at n=432: (1,1) {gaps[1]:.4f}, (2,2) {gaps[2]:.4f} (tol 0.02)")
    assert ok


def test_c09_power_trends(record):
    rhos = (0.0, 0.05, 0.1, 0.15)
    tab = simulate_example1(tau=0.0, rhos=rhos, p=2, q=2, n=864, reps=200,
                            methods=("hallin_theoretical",), seed=9)
    rates = [r.rate for r in tab.rows]
    medians = [r.median_statistic for r in tab.rows]
    mono = all(np.diff(rates) >= 0) and all(np.diff(medians) >= 0)

    heavy = simulate_example2(tau=0.5, rhos=(0.2,), p=2, q=2, n=216, reps=200,
                              methods=("hallin_theoretical", "rdcov_permutation", "dcov_permutation"), seed=19)
    pw = {r.method: r.rate for r in heavy.rows}
    order = pw["hallin_theoretical"] >= pw["dcov_permutation"] - 0.05 and pw["rdcov_permutation"] >= pw[
        "dcov_permutation"] - 0.05
    ok = mono and order
    record(9, ok, "power vs rho " + "/".join(f"{r:.3f}" for r in rates)
           + ", median stat " + "/".join(f"{m:.3f}" for m in medians)
           + f"; Cauchy n=216 rho=0.2: hallin {pw['hallin_theoretical']:.3f}, "
             f"rdcov {pw['rdcov_permutation']:.3f}, dcov {pw['dcov_permutation']:.3f}")
    assert ok


def test_c10_invariant_suites(record):
    here = Path(__file__).parent
    res = subprocess.run(
        [sys.executable, "-m", "pytest", str(here), "-q", "-p", "no:cacheprovider",
         f"--ignore={Path(__file__)}"],
        capture_output=True, text=True, cwd=here.parent,
    )
    tail = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    ok = res.returncode == 0
    record(10, ok, f"module invariant suites: {tail}")
    assert ok, res.stdout[-3000:]
