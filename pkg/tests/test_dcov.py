import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankdcov.dcov import (
    dcov_double_centered,
    dcov_fast,
    dcov_naive,
    distance_matrix,
    marginal_ranks,
    permuted_statistics,
    statistic_mhat,
)
from rankdcov.grid import make_grid


def test_known_value():
    x = np.arange(4.0)
    assert dcov_naive(x, x) == pytest.approx(2 / 3, abs=1e-15)
    assert dcov_fast(x, x) == pytest.approx(2 / 3, rel=1e-13)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(4, 12), p=st.integers(1, 3), q=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_three_estimators_agree(n, p, q, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    y = rng.standard_normal((n, q))
    a = dcov_naive(x, y)
    b = dcov_fast(x, y)
    c = dcov_double_centered(x, y)
    scale = max(abs(a), 1e-300)
    assert abs(a - b) <= 1e-10 * scale + 1e-14
    assert abs(b - c) <= 1e-10 * scale + 1e-14


def test_symmetry_and_invariances():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((30, 2))
    y = x[:, :1] ** 2 + rng.standard_normal((30, 1))
    v = dcov_fast(x, y)
    assert dcov_fast(y, x) == pytest.approx(v, rel=1e-12)
    # translation and rotation invariance, quadratic scaling
    th = 0.7
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert dcov_fast(x @ rot.T + 3.0, y - 1.0) == pytest.approx(v, rel=1e-10)
    assert dcov_fast(2 * x, 3 * y) == pytest.approx(6 * v, rel=1e-12)


def test_unbiased_under_independence():
    rng = np.random.default_rng(1)
    vals = [dcov_fast(rng.standard_normal(20), rng.standard_normal(20)) for _ in range(3000)]
    se = np.std(vals) / np.sqrt(len(vals))
    assert abs(np.mean(vals)) < 4 * se


def test_input_validation():
    with pytest.raises(ValueError):
        dcov_fast(np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        dcov_fast(np.zeros(5), np.zeros(6))
    with pytest.raises(ValueError):
        dcov_fast(np.array([0, 1, 2, np.nan]), np.arange(4.0))
    with pytest.raises(ValueError):
        dcov_naive(np.zeros(65), np.zeros(65))


def test_permuted_statistics_identity_matches_fast():
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((25, 2)), rng.standard_normal((25, 3))
    a, b = distance_matrix(x), distance_matrix(y)
    pi = rng.permutation(25)
    got = permuted_statistics(a, b, [np.arange(25), pi])
    assert got[0] == pytest.approx(25 * dcov_fast(x, y), rel=1e-12)
    assert got[1] == pytest.approx(25 * dcov_fast(x, y[pi]), rel=1e-12)


def test_marginal_ranks_with_ties():
    m = np.array([[3.0, 1.0], [1.0, 1.0], [2.0, 5.0]])
    assert np.array_equal(marginal_ranks(m), [[3, 1.5], [1, 1.5], [2, 3]])


def test_mhat_is_invariant_to_monotone_margins_in_1d():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(50)
    y = x + rng.standard_normal(50)
    g = make_grid(50, 1)
    a = statistic_mhat(x, y, g, g)
    b = statistic_mhat(np.exp(x), y**3, g, g)
    assert a == b
