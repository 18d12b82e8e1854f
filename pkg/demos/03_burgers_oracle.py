import numpy as np

from lowmach.oracle1d import (Profile1D, burgers_exact, burgers_numeric,
                              burgers_sensitivity_exact, derivative_loss_witness,
                              sensitivity_fd_check, shock_time)

# ### Burgers flow in closed form
#
# Pressureless 1D flow moves each particle at its initial speed, so the
# solution is u0 composed with the inverse of x -> x + t u0(x), up to the
# time the characteristics cross.

u0 = Profile1D.from_function(lambda x: 0.1 * np.sin(2 * np.pi * x), 2048,
                             lambda x: 0.2 * np.pi * np.cos(2 * np.pi * x))
print("shock time:", shock_time(u0), "expected", 1 / (0.2 * np.pi))

exact = burgers_exact(u0, 0.5)
numeric = burgers_numeric(u0, 0.5)
print("pseudo-spectral RK4 vs closed form:", np.abs(exact.values - numeric.values).max())

# ### Sensitivity
#
# Differentiating the flow map in the initial data gives
# z(t) o zeta = z0 / (1 + t u0').  Central differences of the exact map
# approach it at second order.

z0 = Profile1D.from_function(lambda x: np.cos(2 * np.pi * x), 2048,
                             lambda x: -2 * np.pi * np.sin(2 * np.pi * x))
z = burgers_sensitivity_exact(u0, z0, 0.5)
chk = sensitivity_fd_check(u0, z0, 0.5)
for lam, err in zip(chk.lambdas, chk.errors):
    print(f"lambda = {lam:.0e}: error {err:.3e}")
print("observed orders:", [round(o, 3) for o in chk.orders])

# ### Losing one derivative
#
# For rough data the difference quotients converge in H^(s-1) but not in
# H^s.  On a fixed grid every norm is equivalent, so the loss shows up as
# grid refinement: the H^(s-1) constant stays put while the H^s constant
# grows with the resolution.

w = derivative_loss_witness()
for n, lo, hi in zip(w["n"], w["h_s_minus_1"], w["h_s"]):
    print(f"n = {n:5d}: H^2 constant {lo:8.3f}   H^3 constant {hi:9.1f}")
print("max |z| =", np.abs(z.values).max())
