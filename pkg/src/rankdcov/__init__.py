"""
rankdcov: independence testing with distance covariance of center-outward
ranks and signs.

The main entry points are :func:`run_test` for a single test,
:func:`critical_value` for asymptotic thresholds, and
:func:`simulate_example1` / :func:`simulate_example2` for size and power
studies.
"""
__version__ = "0.1.0"

from .assignment import (
    Assignment,
    AssignmentError,
    CenterOutwardScores,
    center_outward,
    check_certificate,
    lsap_brute_force,
    lsap_gabow_tarjan,
    lsap_hungarian,
    solve,
)
from .dcov import dcov_double_centered, dcov_fast, dcov_naive, marginal_ranks, statistic_mhat
from .grid import AugmentedGrid, GridSpec, ball_grid, build_grid, factorize, make_grid
from .nulldist import (
    CriticalValueCache,
    IntegrationError,
    MonteCarloNull,
    cdf_weighted_chisq,
    critical_value,
    monte_carlo_null,
    null_weights,
    quantile_weighted_chisq,
    spectrum,
)
from .testkit import (
    METHODS,
    TestConfig,
    TestReport,
    permutation_threshold,
    run_all,
    run_test,
    simulate,
    simulate_example1,
    simulate_example2,
)

__all__ = [
    "Assignment",
    "AssignmentError",
    "AugmentedGrid",
    "CenterOutwardScores",
    "CriticalValueCache",
    "GridSpec",
    "IntegrationError",
    "METHODS",
    "MonteCarloNull",
    "TestConfig",
    "TestReport",
    "ball_grid",
    "build_grid",
    "cdf_weighted_chisq",
    "center_outward",
    "check_certificate",
    "critical_value",
    "dcov_double_centered",
    "dcov_fast",
    "dcov_naive",
    "factorize",
    "lsap_brute_force",
    "lsap_gabow_tarjan",
    "lsap_hungarian",
    "make_grid",
    "marginal_ranks",
    "monte_carlo_null",
    "null_weights",
    "permutation_threshold",
    "quantile_weighted_chisq",
    "run_all",
    "run_test",
    "simulate",
    "simulate_example1",
    "simulate_example2",
    "solve",
    "spectrum",
]
