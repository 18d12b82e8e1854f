"""Closed-form Burgers flow and its sensitivity on the unit circle.

Pre-shock, the solution is the initial profile composed with the inverse
of the characteristic map ``x -> x + t u0(x)``, and a perturbation ``z0``
of the data is carried as ``z0 / (1 + t u0')`` along the same map.  These
give exact references for the spectral 1D solver and for difference
quotients of the solution map.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class HorizonExceeded(ValueError):
    def __init__(self, t, t_crit):
        super().__init__(f"t = {t:.6g} is past the shock time {t_crit:.12g}")
        self.t = t
        self.t_crit = t_crit


class CflViolation(ValueError):
    pass


def _wavenumbers(n):
    return 2 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)


class TrigInterpolant:
    """Evaluate the band-limited interpolant of periodic samples anywhere."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        self.n = n = values.size
        c = np.fft.rfft(values) / n
        w = np.full(c.size, 2.0)
        w[0] = 1.0
        if n % 2 == 0:
            w[-1] = 1.0
        self.c = c * w
        self.k = _wavenumbers(n)

    def __call__(self, x, order=0):
        x = np.asarray(x, dtype=float)
        ck = self.c * (1j * self.k) ** order
        out = np.empty(x.size)
        flat = x.ravel()
        for s in range(0, flat.size, 512):
            e = np.exp(1j * np.outer(flat[s:s + 512], self.k))
            out[s:s + 512] = (e @ ck).real
        return out.reshape(x.shape)


@dataclass
class Profile1D:
    """Samples on ``x_j = j / n``; ``func`` optionally evaluates the profile exactly."""

    values: np.ndarray
    func: Callable | None = None
    deriv: Callable | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    @classmethod
    def from_function(cls, func, n, deriv=None):
        x = np.arange(n) / n
        return cls(func(x), func, deriv)

    @property
    def n(self):
        return self.values.size

    @property
    def x(self):
        return np.arange(self.n) / self.n

    def __call__(self, x):
        if self.func is not None:
            return np.asarray(self.func(np.asarray(x)), dtype=float) * np.ones(np.shape(x))
        return self._interp(x)

    def derivative(self, x):
        if self.deriv is not None:
            return np.asarray(self.deriv(np.asarray(x)), dtype=float) * np.ones(np.shape(x))
        if self.func is not None:
            h = 1e-5
            return (self.func(x + h) - self.func(x - h)) / (2 * h)
        return self._interp(x, 1)

    def _interp(self, x, order=0):
        if not hasattr(self, "_ti"):
            self._ti = TrigInterpolant(self.values)
        return self._ti(x, order)

    def second_derivative(self, x):
        return TrigInterpolant(self.values)(x, 2) if self.func is None else \
            (self.derivative(x + 1e-5) - self.derivative(x - 1e-5)) / 2e-5

    def resample(self, n):
        if self.func is not None:
            return Profile1D.from_function(self.func, n, self.deriv)
        return Profile1D(self._interp(np.arange(n) / n))

    def scaled_sum(self, other, lam):
        """``self + lam * other`` keeping exact evaluators when both have them."""
        vals = self.values + lam * other.values
        if self.func is not None and other.func is not None:
            f1, f2 = self.func, other.func
            d1, d2 = self.derivative, other.derivative
            return Profile1D(vals, lambda x: f1(x) + lam * f2(x),
                             lambda x: d1(x) + lam * d2(x))
        return Profile1D(vals)


def shock_time(u0):
    """``-1 / min u0'`` (infinite when ``u0`` never decreases)."""
    n = u0.n
    xs = np.arange(4 * n) / (4 * n)
    d = u0.derivative(xs)
    i = int(np.argmin(d))
    x = xs[i]
    # refine the minimum of u0' by Newton on u0'' = 0
    ti = TrigInterpolant(u0(np.arange(n) / n)) if u0.func is None else None
    for _ in range(30):
        if ti is not None:
            g, gp = ti(np.array([x]), 2)[0], ti(np.array([x]), 3)[0]
        else:
            h = 1e-4
            g = (u0.derivative(x + h) - u0.derivative(x - h)) / (2 * h)
            gp = (u0.derivative(x + h) - 2 * u0.derivative(x) + u0.derivative(x - h)) / h ** 2
        if gp <= 0:
            break
        step = g / gp
        x -= step
        if abs(step) < 1e-15:
            break
    dmin = min(float(u0.derivative(np.array([x]))[0]), float(d.min()))
    return np.inf if dmin >= 0 else -1.0 / dmin


def _check_horizon(u0, t):
    tc = shock_time(u0)
    if t >= tc:
        raise HorizonExceeded(t, tc)
    return tc


def characteristic_feet(u0, t, y, tol=1e-13):
    """Solve ``x + t u0(x) = y`` for each ``y``; the map is increasing pre-shock."""
    y = np.asarray(y, dtype=float)
    if t == 0:
        return y.copy()
    umax = np.max(u0(np.linspace(0, 1, 4 * u0.n, endpoint=False)))
    umin = np.min(u0(np.linspace(0, 1, 4 * u0.n, endpoint=False)))
    lo = y - t * umax - 1e-12
    hi = y - t * umin + 1e-12
    for _ in range(12):
        mid = 0.5 * (lo + hi)
        g = mid + t * u0(mid) - y
        lo = np.where(g < 0, mid, lo)
        hi = np.where(g >= 0, mid, hi)
    x = 0.5 * (lo + hi)
    for _ in range(50):
        g = x + t * u0(x) - y
        gp = 1 + t * u0.derivative(x)
        step = g / gp
        x = np.clip(x - step, lo, hi)
        if np.max(np.abs(step)) < tol:
            break
    return x


def burgers_exact(u0, t):
    """Exact pre-shock solution of ``u_t + u u_x = 0`` on the grid of ``u0``."""
    _check_horizon(u0, t)
    if t == 0:
        return Profile1D(u0.values.copy())
    x = characteristic_feet(u0, t, u0.x)
    return Profile1D(u0(x))


def burgers_sensitivity_exact(u0, z0, t):
    """Exact derivative of the solution map in the direction ``z0``."""
    _check_horizon(u0, t)
    x = characteristic_feet(u0, t, u0.x)
    return Profile1D(z0(x) / (1 + t * u0.derivative(x)))


def burgers_numeric(u0, t, n=None, dt=None, safety=0.5):
    """Pseudo-spectral RK4 with 2/3 truncation for ``u_t + (u^2/2)_x = 0``."""
    p = u0 if n is None or n == u0.n else u0.resample(n)
    n = p.n
    k = _wavenumbers(n)
    keep = np.arange(k.size) <= n // 3
    umax = max(np.max(np.abs(p.values)), 1e-300)
    kmax = k[keep].max() if keep.any() else 0.0
    if dt is None:
        steps = max(1, int(np.ceil(t * umax * n / safety)))
        dt = t / steps
    else:
        steps = max(1, int(round(t / dt)))
        dt = t / steps
    if dt * umax * kmax > 2.5:
        raise CflViolation(f"dt = {dt:.3g} exceeds the RK4 stability limit")

    def rhs(c):
        u = np.fft.irfft(c, n)
        return -0.5j * k * np.fft.rfft(u * u) * keep

    c = np.fft.rfft(p.values) * keep
    if t > 0:
        for _ in range(steps):
            k1 = rhs(c)
            k2 = rhs(c + 0.5 * dt * k1)
            k3 = rhs(c + 0.5 * dt * k2)
            k4 = rhs(c + dt * k3)
            c = c + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(c)):
                raise CflViolation("solution blew up")
    return Profile1D(np.fft.irfft(c, n))


def sobolev_norm_1d(values, s):
    n = len(values)
    c = np.fft.rfft(values) / n
    w = np.full(c.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    k = _wavenumbers(n)
    return float(np.sqrt(np.sum(w * (1 + k * k) ** s * np.abs(c) ** 2)))


@dataclass
class SensitivityCheck:
    lambdas: list
    errors: list
    orders: list

    @property
    def order(self):
        return min(self.orders) if self.orders else float("nan")


def sensitivity_fd_check(u0, z0, t, lambdas=(1e-2, 1e-3, 1e-4)):
    """Central differences of ``burgers_exact`` against the closed-form sensitivity."""
    z = burgers_sensitivity_exact(u0, z0, t).values
    errs = []
    for lam in lambdas:
        up = burgers_exact(u0.scaled_sum(z0, lam), t).values
        um = burgers_exact(u0.scaled_sum(z0, -lam), t).values
        errs.append(float(np.max(np.abs((up - um) / (2 * lam) - z))))
    orders = [np.log(a / b) / np.log(l1 / l2)
              for a, b, l1, l2 in zip(errs[:-1], errs[1:], lambdas[:-1], lambdas[1:])]
    return SensitivityCheck(list(lambdas), errs, orders)


def rough_profile(n, s, amplitude=0.05, seed=0, modes=None):
    """Random profile with ``|u_m| ~ |m|^{-(s+1)}`` up to ``modes``."""
    rng = np.random.default_rng(seed)
    modes = modes or n // 3
    m = np.arange(1, modes + 1)
    c = np.zeros(n // 2 + 1, complex)
    c[1:modes + 1] = m ** (-(s + 1.0)) * np.exp(2j * np.pi * rng.random(modes))
    v = np.fft.irfft(c, n) * n
    return Profile1D(amplitude * v / np.max(np.abs(v)))


def derivative_loss_witness(ns=(128, 256, 512, 1024), s=3, t=0.5, lam=1e-3, seed=0):
    """Difference-quotient error constants of the exact map across resolutions.

    Data have spectra ``|m|^{-(s+1)}`` out to n/3.  For each grid the
    one-sided quotient error divided by ``lam`` is reported in the H^{s-1}
    and H^s discrete norms: the first stays bounded as the grid is refined,
    the second grows, which is the loss of one derivative.
    """
    low, top = [], []
    for n in ns:
        u0 = rough_profile(n, s, seed=seed)
        z0 = rough_profile(n, s, amplitude=0.05, seed=seed + 1)
        base = burgers_exact(u0, t).values
        z = burgers_sensitivity_exact(u0, z0, t).values
        q = (burgers_exact(u0.scaled_sum(z0, lam), t).values - base) / lam - z
        low.append(sobolev_norm_1d(q, s - 1) / lam)
        top.append(sobolev_norm_1d(q, s) / lam)
    return {"n": list(ns), "lambda": lam, "h_s_minus_1": low, "h_s": top}


def write_oracle_csv(path, x, u_exact, u_numeric, z_exact, z_fd):
    data = np.column_stack([x, u_exact, u_numeric, z_exact, z_fd])
    np.savetxt(path, data, delimiter=",", header="x,u_exact,u_numeric,z_exact,z_fd",
               comments="", fmt="%.17g")
