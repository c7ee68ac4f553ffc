"""
=================================
Null spectrum and critical values
=================================

Under independence the statistic converges to a weighted sum of centered
chi-square variables.  The weights are products of the eigenvalues of the
centered distance kernel on the two unit balls; for ``p = 1`` these are
``-4 / (pi^2 j^2)``.
"""
import numpy as np

from rankdcov.nulldist import (
    cdf_weighted_chisq,
    closed_form_eigenvalues,
    critical_value,
    monte_carlo_null,
    null_weights,
    spectrum,
)

sp = spectrum(1, M_R=40, M_S=50, method="matrix")
print("matrix route :", sp.eigenvalues[:3].round(5))
print("closed form  :", closed_form_eigenvalues(3).round(5))

w = null_weights(2, 2)
print("(2,2) weights kept:", w.K, "tail variance:", f"{w.tail_variance:.2e}")
q95 = critical_value(2, 2, 0.05)
print("Q_0.95 for (2,2):", round(q95, 4), " CDF there:", round(cdf_weighted_chisq(w, q95), 4))

# The exact finite-n null law is a random pairing of the two grids.
mc = monte_carlo_null(216, 2, 2, reps=5000, seed=0)
print("n=216 Monte Carlo 0.95 quantile:", round(mc.quantile(0.95), 4))
print("exact size of the asymptotic test at n=216:", np.mean(mc.values > q95))
