"""Time integration for incompressible Euler, the compressible (u, f) system
and the convected wave equation over a prescribed background flow."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .domain import (ScalarField, VectorField, advect, dealias, delta, div, grad,
                     integrate, partial, sobolev_norm)
from .elliptic import project_p
from .eos import UnphysicalStateError, sound_speed_squared


class NumericalFailure(ArithmeticError):
    def __init__(self, name, t):
        super().__init__(f"non-finite values in {name} at t = {t:.6g}")
        self.field_name = name
        self.t = t


class BackgroundUnavailable(ValueError):
    pass


# ------------------------------------------------------------------ states


@dataclass(frozen=True)
class EulerState:
    v: VectorField
    t: float = 0.0

    @property
    def domain(self):
        return self.v.domain


@dataclass(frozen=True)
class CompressibleState:
    u: VectorField
    f: ScalarField
    t: float = 0.0

    @property
    def domain(self):
        return self.u.domain


@dataclass(frozen=True)
class WaveState:
    f: ScalarField
    phi: ScalarField
    t: float = 0.0
    background: Callable = None

    @property
    def domain(self):
        return self.f.domain


# ------------------------------------------------------- background providers


class SteadyBackground:
    def __init__(self, u):
        self.u = u

    def __call__(self, t):
        return self.u

    t_range = (-np.inf, np.inf)


class TrajectoryBackground:
    """Piecewise cubic Hermite interpolation of stored velocities in time.

    ``rates`` are the time derivatives at the stored instants; without them
    the interpolation is piecewise linear.
    """

    def __init__(self, times, velocities, rates=None):
        self.times = np.asarray(times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must increase")
        self.velocities = list(velocities)
        self.rates = None if rates is None else list(rates)
        self.t_range = (self.times[0], self.times[-1])

    def __call__(self, t):
        t0, t1 = self.t_range
        span = max(t1 - t0, 1.0)
        if t < t0 - 1e-12 * span or t > t1 + 1e-12 * span:
            raise BackgroundUnavailable(f"background undefined at t = {t:.6g}")
        i = int(np.clip(np.searchsorted(self.times, t) - 1, 0, len(self.times) - 2))
        ta, tb = self.times[i], self.times[i + 1]
        h = tb - ta
        s = (t - ta) / h
        ua, ub = self.velocities[i], self.velocities[i + 1]
        if self.rates is None:
            return ua * (1 - s) + ub * s
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return (ua * h00 + self.rates[i] * (h10 * h) + ub * h01
                + self.rates[i + 1] * (h11 * h))


# --------------------------------------------------------------- right sides


def incompressible_rhs(state):
    v = state.v
    return -project_p(dealias(advect(v, v)))


def compressible_rhs(state, eos):
    u, f = state.u, state.f
    c2 = sound_speed_squared(eos, f)
    gf = grad(f)
    du = -dealias(advect(u, u) + gf * c2)
    df = -dealias(advect(u, f)) - div(u)
    return du, df


def gradient_contraction(u):
    """``F = sum_ij (d_j u_i)(d_i u_j)``."""
    a, b = partial(u.x, 0), partial(u.x, 1)
    c, d = partial(u.y, 0), partial(u.y, 1)
    return a * a + b * c * 2.0 + d * d


def convected_wave_rhs(state, eos):
    if state.background is None:
        raise BackgroundUnavailable("wave state has no background velocity")
    u = state.background(state.t)
    f, phi = state.f, state.phi
    c2 = sound_speed_squared(eos, f)
    df = phi - dealias(advect(u, f))
    dphi = dealias(gradient_contraction(u) - advect(u, phi)) - delta(dealias(grad(f) * c2))
    return df, dphi


# ------------------------------------------------------------------- stepping


def _check(name, fld, t):
    vals = [fld.x.values, fld.y.values] if isinstance(fld, VectorField) else [fld.values]
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise NumericalFailure(name, t)


def _rk4(y, t, dt, rhs):
    """Classical RK4 on tuples of fields."""
    def axpy(base, incr, a):
        return tuple(b + i * a for b, i in zip(base, incr))

    k1 = rhs(y, t)
    k2 = rhs(axpy(y, k1, dt / 2), t + dt / 2)
    k3 = rhs(axpy(y, k2, dt / 2), t + dt / 2)
    k4 = rhs(axpy(y, k3, dt), t + dt)
    return tuple(b + (a1 + (a2 + a3) * 2.0 + a4) * (dt / 6.0)
                 for b, a1, a2, a3, a4 in zip(y, k1, k2, k3, k4))


def step(state, eos=None, dt=None, scheme="rk4"):
    """Advance one explicit RK4 step."""
    if scheme.lower() != "rk4":
        raise ValueError(f"unknown scheme {scheme!r}")
    if dt is None:
        dt = cfl_dt(state, eos)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            return _step(state, eos, dt)
    except UnphysicalStateError as exc:
        raise NumericalFailure("sound speed", state.t + dt) from exc


def _step(state, eos, dt):
    t = state.t
    if isinstance(state, EulerState):
        (v,) = _rk4((state.v,), t, dt,
                    lambda y, s: (incompressible_rhs(EulerState(y[0], s)),))
        _check("v", v, t + dt)
        return EulerState(project_p(v), t + dt)
    if isinstance(state, CompressibleState):
        u, f = _rk4((state.u, state.f), t, dt,
                    lambda y, s: compressible_rhs(CompressibleState(y[0], y[1], s), eos))
        _check("u", u, t + dt)
        _check("f", f, t + dt)
        return CompressibleState(u, f, t + dt)
    if isinstance(state, WaveState):
        bg = state.background
        f, phi = _rk4((state.f, state.phi), t, dt,
                      lambda y, s: convected_wave_rhs(WaveState(y[0], y[1], s, bg), eos))
        _check("f", f, t + dt)
        _check("phi", phi, t + dt)
        return WaveState(f, phi, t + dt, bg)
    raise TypeError(f"cannot step {type(state).__name__}")


def cfl_dt(state, eos=None, safety=0.4):
    d = state.domain
    h = min(d.dx, d.dy)
    if isinstance(state, EulerState):
        vmax = state.v.max_abs()
        return np.inf if vmax == 0 else safety * h / vmax
    if isinstance(state, CompressibleState):
        vmax = state.u.max_abs()
        c2max = sound_speed_squared(eos, state.f).max()
    else:
        vmax = state.background(state.t).max_abs()
        c2max = sound_speed_squared(eos, state.f).max()
    return safety * h / (vmax + np.sqrt(c2max))


# -------------------------------------------------------------- diagnostics


def kinetic_energy(u, f=None):
    e = u.dot(u)
    if f is not None:
        e = e * f.map(np.exp)
    return 0.5 * integrate(e)


def total_mass(f):
    return integrate(f.map(np.exp))


@dataclass
class Sample:
    t: float
    kinetic_energy: float
    mass: float
    f_h4: float
    fdot_h3: float
    div_l2: float
    dt: float


def sample(state, dt):
    if isinstance(state, EulerState):
        return Sample(state.t, kinetic_energy(state.v), float("nan"), float("nan"),
                      float("nan"), float(sobolev_norm(div(state.v), 0)), dt)
    if isinstance(state, WaveState):
        return Sample(state.t, float("nan"), total_mass(state.f), float(sobolev_norm(state.f, 4)),
                      float(sobolev_norm(state.phi, 3)), float("nan"), dt)
    fdot = delta(state.u)
    return Sample(state.t, kinetic_energy(state.u, state.f), total_mass(state.f),
                  float(sobolev_norm(state.f, 4)), float(sobolev_norm(fdot, 3)),
                  float(sobolev_norm(fdot, 0)), dt)


@dataclass
class RunResult:
    states: list
    samples: list = field(default_factory=list)
    dt: float = 0.0
    steps: int = 0

    @property
    def final(self):
        return self.states[-1]


def integrate_to(state, eos, t_final, dt=None, safety=0.4, output_times=None,
                 callback=None):
    """March ``state`` to ``t_final`` with a fixed step.

    The step is fixed from the initial state (``safety`` times the CFL
    limit) unless given, then shortened so output times are hit exactly.
    Returns the states at the requested output times (``t_final`` always
    included) and one diagnostics sample per output.
    """
    if dt is None:
        dt = cfl_dt(state, eos, safety)
        if not np.isfinite(dt):
            dt = t_final - state.t if t_final > state.t else 1.0
    outs = sorted(set([t_final] if output_times is None else list(output_times) + [t_final]))
    t0 = state.t
    states, samples = [], []
    steps = 0
    for tout in outs:
        if tout < t0 - 1e-14:
            continue
        n = int(np.ceil((tout - state.t) / dt - 1e-9))
        if n > 0:
            h = (tout - state.t) / n
            for _ in range(n):
                state = step(state, eos, h)
                steps += 1
                if callback is not None:
                    callback(state)
            state = replace(state, t=tout)
        states.append(state)
        samples.append(sample(state, dt))
    return RunResult(states, samples, dt, steps)


def write_timeseries(path, samples):
    cols = ["t", "kinetic_energy", "mass", "f_h4", "fdot_h3", "div_l2", "dt"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for s in samples:
            fh.write(",".join(repr(float(getattr(s, c))) for c in cols) + "\n")
