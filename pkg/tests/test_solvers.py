import numpy as np
import pytest

from lowmach.domain import DomainSpec, ScalarField, VectorField, sobolev_norm
from lowmach.eos import Eos
from lowmach.solvers import (BackgroundUnavailable, CompressibleState, EulerState,
                             NumericalFailure, SteadyBackground, TrajectoryBackground,
                             WaveState, cfl_dt, compressible_rhs, incompressible_rhs,
                             integrate_to, kinetic_energy, step, total_mass, write_timeseries)


def taylor_green(d):
    return VectorField.from_function(d, lambda X, Y: np.sin(X) * np.cos(Y),
                                     lambda X, Y: -np.cos(X) * np.sin(Y))


def test_taylor_green_is_steady():
    d = DomainSpec.torus(32, 2 * np.pi)
    v0 = taylor_green(d)
    assert incompressible_rhs(EulerState(v0)).max_abs() < 1e-13
    run = integrate_to(EulerState(v0), None, 0.5, dt=0.05)
    assert sobolev_norm(run.final.v - v0, 0) < 1e-12


def test_rest_state_is_equilibrium(torus):
    st = CompressibleState(VectorField.zeros(torus), ScalarField.zeros(torus))
    du, df = compressible_rhs(st, Eos(100.0))
    assert du.max_abs() == 0 and df.max_abs() == 0


def test_acoustic_period():
    # small standing wave: f = a cos(x), u = 0; returns after one period 2 pi / sqrt(k)
    k = 1e4
    d = DomainSpec.torus(16, 2 * np.pi)
    f0 = ScalarField.from_function(d, lambda X, Y: 1e-6 * np.cos(X))
    st = CompressibleState(VectorField.zeros(d), f0)
    eos = Eos(k, family="linear")
    period = 2 * np.pi / np.sqrt(k)
    run = integrate_to(st, eos, period, safety=0.1)
    assert (run.final.f - f0).max_abs() < 1e-3 * 1e-6


def test_mass_conservation_channel():
    d = DomainSpec.channel(16, 16, lx=1.0)
    u0 = VectorField.from_function(
        d, lambda X, Y: np.sin(2 * np.pi * X) * np.cos(np.pi * Y),
        lambda X, Y: -2 * np.cos(2 * np.pi * X) * np.sin(np.pi * Y))
    f0 = ScalarField.from_function(d, lambda X, Y: 1e-3 * np.cos(2 * np.pi * X) * np.cos(np.pi * Y))
    st = CompressibleState(u0, f0)
    eos = Eos(100.0)
    m0 = total_mass(f0)
    run = integrate_to(st, eos, 0.1)
    assert abs(total_mass(run.final.f) - m0) < 1e-8 * m0
    assert np.all(run.final.u.y.values[:, [0, -1]] == 0)


def test_energy_budget_incompressible(torus, rng):
    from lowmach.domain import random_vector
    from lowmach.elliptic import project_p
    v0 = project_p(random_vector(torus, rng, kmax=3)) * 0.5
    run = integrate_to(EulerState(v0), None, 0.2, dt=0.01)
    e0 = kinetic_energy(v0)
    assert abs(kinetic_energy(run.final.v) - e0) < 1e-6 * e0


def test_numerical_failure_reported(torus):
    u = VectorField.from_function(torus, lambda X, Y: np.sin(X), lambda X, Y: 0 * X)
    st = CompressibleState(u, ScalarField.zeros(torus))
    with pytest.raises(NumericalFailure):
        for _ in range(200):
            st = step(st, Eos(1e4), dt=1.0)


def test_unknown_scheme(torus):
    with pytest.raises(ValueError):
        step(EulerState(VectorField.zeros(torus)), None, 0.1, scheme="euler")


def test_cfl_dt(torus):
    st = CompressibleState(VectorField.zeros(torus), ScalarField.zeros(torus))
    dt = cfl_dt(st, Eos(100.0), safety=0.5)
    assert dt == pytest.approx(0.5 * torus.dx / 10.0)
    assert cfl_dt(EulerState(VectorField.zeros(torus))) == np.inf


def test_background_providers(torus):
    u = taylor_green(torus)
    assert SteadyBackground(u)(3.0) is u
    tb = TrajectoryBackground([0.0, 1.0], [u, u * 3.0])
    assert (tb(0.5) - u * 2.0).max_abs() < 1e-14
    with pytest.raises(BackgroundUnavailable):
        tb(1.5)
    herm = TrajectoryBackground([0.0, 1.0], [u, u * 3.0], rates=[u * 2.0, u * 2.0])
    assert (herm(0.25) - u * 1.5).max_abs() < 1e-14


def test_wave_equation_matches_compressible_on_frozen_background():
    # with u = 0 the convected wave equation is the linearized acoustic system
    d = DomainSpec.torus(16, 2 * np.pi)
    k = 100.0
    f0 = ScalarField.from_function(d, lambda X, Y: 1e-6 * np.cos(X + Y))
    w = WaveState(f0, ScalarField.zeros(d), 0.0, SteadyBackground(VectorField.zeros(d)))
    eos = Eos(k, family="linear")
    t = 0.3
    run = integrate_to(w, eos, t, safety=0.1)
    omega = np.sqrt(2 * k)
    exact = f0 * np.cos(omega * t)
    assert (run.final.f - exact).max_abs() < 1e-4 * 1e-6
    with pytest.raises(BackgroundUnavailable):
        step(WaveState(f0, f0, 0.0, None), eos, 0.01)


def test_timeseries_csv(tmp_path, torus):
    run = integrate_to(CompressibleState(taylor_green(torus), ScalarField.zeros(torus)),
                       Eos(100.0), 0.05, output_times=[0.025])
    write_timeseries(tmp_path / "ts.csv", run.samples)
    data = np.loadtxt(tmp_path / "ts.csv", delimiter=",", skiprows=1)
    assert data.shape == (2, 7)
    assert data[-1, 0] == pytest.approx(0.05)
