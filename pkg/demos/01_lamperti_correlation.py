"""
The stationary picture of integrated fractional Brownian motion
===============================================================

Time-changing IFBM with t = e^tau and rescaling by e^{-(1+H) tau} gives a
stationary Gaussian process.  Its correlation r(tau) is smooth at the
origin and decays like e^{-(1-H) tau}.  This script evaluates r, checks it
against the covariance of IFBM itself and reports Rice's interzero distance.
"""

import numpy as np

from ifbm_persistence import LampertiModel, ifbm_covariance, lamperti_correlation
from ifbm_persistence import lamperti_decay_check, rice_interzero_distance

# correlation at a few lags for three Hurst values
tau = np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0])
for H in (0.3, 0.5, 0.7):
    print(f"H={H}: r(tau) =", np.round(lamperti_correlation(H, tau), 6))

# r(tau1 - tau2) is just the normalized IFBM covariance at e^tau1, e^tau2
H = 0.7
m = LampertiModel(H)
t1, t2 = 0.3, -1.1
cov = ifbm_covariance(H, np.exp(t1), np.exp(t2), scale=m.structure_scale)
print("normalized covariance", m.c**2 * np.exp(-(1 + H) * (t1 + t2)) * cov)
print("r(t1 - t2)          ", float(lamperti_correlation(H, t1 - t2)))

# the tail decays at rate 1 - H
rep = lamperti_decay_check(m, np.linspace(10, 30, 21))
print(f"fitted log-slope {rep.rate:.5f}, expected {rep.expected_rate:.5f}")

# mean distance between zeros of the stationary process
for H in (0.1, 0.5, 0.9):
    print(f"H={H}: Delta0 = {rice_interzero_distance(H):.4f}")
