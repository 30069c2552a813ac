"""
Simulating first zeros
======================

Each path of the stationary process is generated row by row and stopped at
its first sign change.  Paths starting below zero give the first zero time
Z of IFBM in logarithmic time, whose survival function decays like
exp(-theta t).  For H = 1/2 the exponent is exactly 1/4.
"""

import numpy as np

from ifbm_persistence import correlation_samples, make_grid, schur_coefficients
from ifbm_persistence import simulate_series, survival_estimate

table = schur_coefficients(correlation_samples(make_grid(0.5, n0=50, eps_L=1e-3)))

# one series of 100 000 paths; the seed and series id fix every record
rec = simulate_series(table, seed=1, series_id=0, n_paths=100_000)
print(f"{len(rec)} records, {int(rec.censored.sum())} censored at the horizon")

curve = survival_estimate(rec)
print(f"negative-start fraction {curve.start_negative_fraction:.4f}")

# -ln P(Z > t) is close to linear with slope 1/4 well inside the tail
slope, intercept = curve.loglinear_fit(8.0, 20.0)
print(f"least-squares tail slope {slope:.4f} (theta = 0.25)")

for t in (5, 10, 15, 20):
    i = np.searchsorted(curve.t, t)
    print(f"t={t:>2}: -ln P = {curve.neg_log()[min(i, len(curve.t) - 1)]:.3f}")
