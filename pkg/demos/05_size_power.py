"""
=====================
Size and power study
=====================

Gaussian design with one cross-correlation ``rho`` between ``X_1`` and
``Y_1``, and the same design pushed to Cauchy margins.  Rates come with
binomial standard errors.  Increase ``reps`` for smoother numbers.
"""
from rankdcov.testkit import simulate_example1, simulate_example2

methods = ("hallin_theoretical", "rdcov_permutation", "dcov_permutation")
gauss = simulate_example1(tau=0.0, rhos=(0.0, 0.2), p=2, q=2, n=216, reps=40, methods=methods, seed=1)
print(gauss.to_csv())

cauchy = simulate_example2(tau=0.5, rhos=(0.2,), p=2, q=2, n=216, reps=40, methods=methods, seed=1)
for row in cauchy.rows:
    print(f"{row.method:20s} power {row.rate:.3f} +- {row.se:.3f}")
