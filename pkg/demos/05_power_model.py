"""
A power correction to the exponential tail
==========================================

If P(Z > t) behaves like t^alpha exp(-theta0 t), a window fit returns a
slope slightly off theta0.  The expected slope is computed by quadrature,
together with the Cramer-Rao estimate of how many paths are needed to
resolve alpha itself.
"""

from ifbm_persistence import PowerModel, cramer_rao_paths, expected_slope_power_model
from ifbm_persistence import lnZ_std_truncated, tail_window

H = 0.7
pm = PowerModel(H * (1 - H), H - 0.5)
for eps in (0.1, 0.01, 0.001):
    w = tail_window(H, eps)
    print(f"eps={eps}: expected slope {expected_slope_power_model(pm, w):.5f} (theta0 = 0.21)")

# density t^alpha e^{-theta0 t} and the survival form of the same law
w = tail_window(H, 0.01)
print("survival form:", round(expected_slope_power_model(pm, w, form="survival"), 5))

for eps in (0.01, 0.001):
    s = lnZ_std_truncated(0.25, eps, 20, 0)
    n = cramer_rao_paths(0.01, eps, 20)
    print(f"eps={eps}: sd(ln Z)={s:.5f}, paths for sd(alpha)=0.01: {n / 1e6:.0f}e6")
