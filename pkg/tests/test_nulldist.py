import json
import math
import warnings

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import chi2, norm

from rankdcov import nulldist
from rankdcov.nulldist import (
    CriticalValueCache,
    IntegrationError,
    ProductSpectrum,
    Spectrum,
    cdf_weighted_chisq,
    closed_form_eigenvalues,
    critical_value,
    monte_carlo_null,
    null_weights,
    product_spectrum,
    published_critical_values,
    quantile_weighted_chisq,
    spectrum,
)


# --------------------------------------------------------------------------
# weighted chi-square law


@pytest.mark.parametrize("k", [2, 5, 40])
def test_cdf_equal_weights_is_shifted_chi2(k):
    lam = 0.3
    for x in [-0.5 * k * lam, -1.0, 0.0, 0.7, 3.0]:
        want = chi2.cdf(x / lam + k, df=k)
        assert cdf_weighted_chisq(np.full(k, lam), x) == pytest.approx(want, abs=1e-6)


def test_cdf_single_weight_uses_exact_law():
    assert cdf_weighted_chisq([2.0], 1.0) == pytest.approx(chi2.cdf(1.5, 1), abs=1e-15)


def test_cdf_with_gaussian_tail_matches_convolution():
    lam, tv = 0.5, 0.3
    sd = math.sqrt(tv)

    def direct(x):
        f = lambda s: chi2.pdf(s, 1) * norm.cdf((x - lam * (s - 1)) / sd)
        return integrate.quad(f, 0, np.inf, limit=200)[0]

    for x in [-0.8, 0.0, 0.5, 2.0]:
        assert cdf_weighted_chisq([lam], x, tail_variance=tv) == pytest.approx(direct(x), abs=1e-6)


def test_cdf_is_monotone_and_bounded():
    w = 1.0 / np.arange(1, 200) ** 2
    xs = np.linspace(-1.0, 6.0, 40)
    f = cdf_weighted_chisq(w, xs)
    assert np.all(np.diff(f) >= -1e-9)
    assert f[0] >= 0 and f[-1] <= 1
    assert f[-1] > 0.99  # leading weight 1: P(chi2_1 > 7) is about 0.008


def test_quantile_inverts_cdf():
    w = 1.0 / np.arange(1, 300) ** 1.5
    for prob in (0.9, 0.95, 0.99):
        x = quantile_weighted_chisq(w, prob)
        assert cdf_weighted_chisq(w, x) == pytest.approx(prob, abs=2e-4)


def test_quantile_single_weight_closed_form():
    assert quantile_weighted_chisq([1.0], 0.95) == pytest.approx(chi2.ppf(0.95, 1) - 1)


def test_integration_error_reports_bound():
    with pytest.raises(IntegrationError) as info:
        cdf_weighted_chisq(1.0 / np.arange(1, 50) ** 2, 0.3, atol=1e-30)
    assert info.value.error_bound > 0


@pytest.mark.parametrize("bad", [[], [1.0, -1.0], [np.inf, 1.0]])
def test_bad_weights(bad):
    with pytest.raises(ValueError):
        cdf_weighted_chisq(bad, 0.0)


# --------------------------------------------------------------------------
# spectra


def test_closed_form_values():
    ev = closed_form_eigenvalues(3)
    assert np.allclose(ev, [-4 / math.pi**2, -1 / math.pi**2, -4 / (9 * math.pi**2)])


def test_matrix_route_matches_closed_form_for_p1():
    sp = spectrum(1, M_R=20, M_S=20, method="matrix")
    assert np.allclose(sp.eigenvalues[:3], closed_form_eigenvalues(3), atol=1e-2)
    assert np.all(np.diff(np.abs(sp.eigenvalues)) <= 1e-15)


@pytest.mark.parametrize("p,M_R,M_S", [(1, 10, 10), (2, 12, 12), (3, 8, 16), (4, 6, 30)])
def test_trace_identity(p, M_R, M_S):
    sp = spectrum(p, M_R, M_S, method="matrix")
    assert sp.eigenvalues.size == M_R * M_S - 1
    assert np.all(sp.eigenvalues < 0)
    assert sp.eigenvalues.sum() == pytest.approx(-sp.mean_distance, rel=1e-10)


def test_closed_form_trace_limit():
    # E|U - U'| = 2/3 for U uniform on [-1, 1]
    assert -closed_form_eigenvalues(200_000).sum() == pytest.approx(2 / 3, abs=1e-5)


def test_spectrum_argument_checks():
    with pytest.raises(ValueError):
        spectrum(0)
    with pytest.raises(ValueError):
        spectrum(2, method="closed_form")
    with pytest.raises(ValueError):
        spectrum(1, M_R=3, M_S=3, method="matrix")


def test_product_spectrum_truncation_sums():
    a = Spectrum(1, 2, 2, -np.array([0.5, 0.2, 0.1]), True)
    b = Spectrum(1, 2, 2, -np.array([0.4, 0.3]), True)
    ps = product_spectrum(a, b, K=4)
    assert np.allclose(ps.lambdas, [0.2, 0.15, 0.08, 0.06])
    assert ps.tail_sum == pytest.approx(0.04 + 0.03)
    assert ps.tail_sq_sum == pytest.approx(0.04**2 + 0.03**2)
    assert ps.tail_variance == pytest.approx(2 * (0.04**2 + 0.03**2))


def test_product_spectrum_without_truncation():
    a = Spectrum(1, 2, 2, -np.array([0.5, 0.2]), True)
    ps = product_spectrum(a, a, K=100)
    assert ps.K == 4 and ps.tail_sum == 0


# --------------------------------------------------------------------------
# critical values and cache


def test_critical_value_one_one(tmp_path):
    cache = CriticalValueCache(tmp_path / "cv.jsonl", use_shipped=False)
    v = critical_value(1, 1, 0.05, cache=cache)
    assert v == pytest.approx(0.490, abs=5e-3)
    rec = json.loads((tmp_path / "cv.jsonl").read_text().splitlines()[0])
    assert set(rec) == {"p", "q", "alpha", "M_R", "M_S", "K", "value", "generator_version"}
    assert rec["M_R"] == "auto"


def test_cache_warm_hit_skips_spectra(tmp_path):
    path = tmp_path / "cv.jsonl"
    CriticalValueCache(path, use_shipped=False).put(2, 7, 0.05, None, None, nulldist.DEFAULT_K, 0.123)
    before = nulldist.spectral_solves
    v = critical_value(7, 2, 0.05, cache=CriticalValueCache(path, use_shipped=False))
    assert v == 0.123
    assert nulldist.spectral_solves == before


def test_corrupt_cache_warns(tmp_path):
    path = tmp_path / "cv.jsonl"
    path.write_text("{not json\n")
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        assert CriticalValueCache(path, use_shipped=False).get(1, 1, 0.05, None, None, 10) is None
    assert rec


def test_shipped_table_covers_small_dimensions():
    cache = CriticalValueCache("/nonexistent/dir/cv.jsonl")
    v = cache.get(2, 2, 0.05, None, None, nulldist.DEFAULT_K)
    assert v is not None and v == pytest.approx(0.205, abs=5e-3)


def test_published_table():
    t = published_critical_values()
    assert len(t) == 300
    assert t[(0.05, 1, 1)] == 0.490
    assert all(t[(a, p, q)] == t[(a, q, p)] for a, p, q in t)


def test_null_weights_are_cached():
    a = null_weights(1, 1)
    assert null_weights(1, 1) is a
    assert isinstance(a, ProductSpectrum)


def test_alpha_range():
    with pytest.raises(ValueError):
        critical_value(1, 1, 1.5, cache=False)


# --------------------------------------------------------------------------
# Monte Carlo null


def test_monte_carlo_null_is_reproducible():
    a = monte_carlo_null(40, 2, 2, reps=200, seed=5)
    b = monte_carlo_null(40, 2, 2, reps=200, seed=5, workers=3)
    assert np.array_equal(a.values, b.values)
    assert np.all(np.diff(a.values) >= 0)
    c = monte_carlo_null(40, 2, 2, reps=200, seed=6)
    assert not np.array_equal(a.values, c.values)


def test_monte_carlo_pvalue_and_quantile():
    mc = monte_carlo_null(30, 1, 1, reps=99, seed=0)
    assert mc.pvalue(np.inf) == pytest.approx(1 / 100)
    assert mc.pvalue(-np.inf) == 1.0
    q = mc.quantile(0.95)
    assert q in mc.values
    lo, hi = mc.bootstrap_ci(0.95, B=200)
    assert lo <= hi


def test_monte_carlo_null_centered_near_zero():
    mc = monte_carlo_null(100, 1, 1, reps=2000, seed=1)
    # E[n dCov_n^2] = 0 under independence (unbiased estimator)
    assert abs(mc.values.mean()) < 4 * mc.values.std() / math.sqrt(2000)
