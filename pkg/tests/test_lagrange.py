import numpy as np
import pytest

from lowmach.domain import DomainSpec, ScalarField, VectorField, partial, random_field
from lowmach.eos import Eos
from lowmach.lagrange import (DegenerateFlowMapError, Direction, Evaluator, FixedPointError,
                              FlowMap, approx_sequence, density_from_jacobian, evaluate,
                              eulerian_velocity, flow_advance, psi_t, pullback,
                              solve_flow_integral_equation, zrz_operators)
from lowmach.solvers import CompressibleState, EulerState, SteadyBackground, integrate_to


def tg(d):
    return VectorField.from_function(d, lambda X, Y: np.sin(X) * np.cos(Y),
                                     lambda X, Y: -np.cos(X) * np.sin(Y))


@pytest.mark.parametrize("geom", ["torus", "channel"])
def test_evaluator_reproduces_grid_and_off_grid(geom, rng):
    d = DomainSpec.torus(16, 2 * np.pi) if geom == "torus" else DomainSpec.channel(16, 8, 2 * np.pi)
    f = random_field(d, rng)
    X, Y = d.mesh(f.parity)
    assert np.abs(evaluate(f, X, Y) - f.values).max() < 1e-12
    g = ScalarField.from_function(d, lambda X, Y: np.cos(X) * np.cos(np.pi * Y if geom == "channel" else Y))
    pts = rng.random((2, 50)) * np.array([[2 * np.pi], [1.0 if geom == "channel" else 2 * np.pi]])
    exact = np.cos(pts[0]) * np.cos(np.pi * pts[1] if geom == "channel" else pts[1])
    assert np.abs(evaluate(g, pts[0], pts[1]) - exact).max() < 1e-12


def test_evaluator_derivatives(torus):
    f = ScalarField.from_function(torus, lambda X, Y: np.sin(2 * X + Y))
    ev = Evaluator([f], derivatives=[(f, (1, 0))])
    x = np.array([0.3, 1.1])
    y = np.array([2.0, 0.4])
    v, vx = ev(x, y)
    assert np.allclose(v, np.sin(2 * x + y), atol=1e-13)
    assert np.allclose(vx, 2 * np.cos(2 * x + y), atol=1e-12)


def test_identity_flow(torus):
    fl = FlowMap.identity(torus)
    assert (fl.jacobian - 1.0).max_abs() == 0
    X, Y = fl.inverse_points()
    Xg, Yg = torus.mesh()
    assert np.abs(X - Xg).max() < 1e-14 and np.abs(Y - Yg).max() < 1e-14


def test_degenerate_flow_rejected(torus):
    fold = ScalarField.from_function(torus, lambda X, Y: -2.0 * np.sin(X))
    fl = FlowMap(fold, ScalarField.zeros(torus), VectorField.zeros(torus))
    with pytest.raises(DegenerateFlowMapError):
        fl.check()


def test_pullback_round_trip():
    d = DomainSpec.torus(32, 2 * np.pi)
    u = tg(d)
    fl = FlowMap.identity(d, u)
    for _ in range(10):
        fl = flow_advance(fl, SteadyBackground(u), 0.05)
    f = ScalarField.from_function(d, lambda X, Y: np.cos(X + 2 * Y))
    g = pullback(pullback(f, fl, Direction.WITH_ZETA), fl, Direction.WITH_ZETA_INVERSE)
    assert (g - f).max_abs() < 1e-6


def test_taylor_green_flow_is_area_preserving(torus):
    u = tg(torus)
    fl = FlowMap.identity(torus, u)
    for _ in range(20):
        fl = flow_advance(fl, SteadyBackground(u), 0.025)
    assert (fl.jacobian - 1.0).max_abs() < 1e-5
    assert (eulerian_velocity(fl) - u).max_abs() < 1e-7


def test_density_identity_transported_and_literal():
    d = DomainSpec.torus(32, 2 * np.pi)
    eos = Eos(1e3)
    u0 = tg(d)
    f0 = ScalarField.from_function(d, lambda X, Y: 1e-3 * np.cos(X) * np.cos(Y))
    res = psi_t(u0, f0.map(np.exp), eos, 0.2)
    transported = density_from_jacobian(res.flow, f0)
    literal = density_from_jacobian(res.flow, f0, transport_initial=False)
    err_t = (transported - res.state.f).max_abs()
    err_l = (literal - res.state.f).max_abs()
    assert err_t < 1e-7
    assert err_l > 100 * err_t
    # with constant initial density both forms coincide
    res0 = psi_t(u0, ScalarField.constant(d, 1.0), eos, 0.2)
    lit0 = density_from_jacobian(res0.flow, ScalarField.zeros(d), transport_initial=False)
    assert (lit0 - res0.state.f).max_abs() < 1e-7


def test_psi_at_time_zero_is_affine(torus):
    u0 = tg(torus)
    res = psi_t(u0, ScalarField.constant(torus, 1.0), Eos(100.0), 0.0)
    assert res.flow.disp_x.max_abs() == 0 and (res.flow.velocity - u0).max_abs() == 0


def test_zr_operators_on_divergence_free_flow(torus):
    u = tg(torus)
    fl = FlowMap.identity(torus, u)
    Z, R, ZR = zrz_operators(fl, u)
    # at the identity map Z - R reduces to -Q(u.grad u) = the pressure force
    from lowmach.domain import advect
    from lowmach.elliptic import project_q
    assert (Z - project_q(advect(u, u))).max_abs() < 1e-12
    assert R.max_abs() < 1e-12
    assert (ZR - Z).max_abs() < 1e-12


def test_flow_integral_equation_matches_direct_markers():
    d = DomainSpec.torus(16, 2 * np.pi)
    u = tg(d)
    times = list(np.linspace(0, 0.2, 41))
    zero = [VectorField.zeros(d)] * len(times)
    flows, hist = solve_flow_integral_equation(u, times, zero)
    assert hist[-1] <= 1e-8
    fl = FlowMap.identity(d, u)
    for _ in range(40):
        fl = flow_advance(fl, SteadyBackground(u), 0.005)
    assert (flows[-1].disp_x - fl.disp_x).max_abs() < 1e-4
    assert (flows[-1].velocity - fl.velocity).max_abs() < 1e-4


def test_flow_integral_equation_rejects_long_horizon():
    d = DomainSpec.torus(16, 2 * np.pi)
    u = tg(d) * 5.0
    times = list(np.linspace(0, 3.0, 4))
    with pytest.raises(FixedPointError):
        solve_flow_integral_equation(u, times, [VectorField.zeros(d)] * 4, max_iter=30)


def test_approx_sequence_level_zero_is_incompressible():
    d = DomainSpec.torus(16, 2 * np.pi)
    v = tg(d) + VectorField.from_function(d, lambda X, Y: 0.2 * np.sin(2 * Y), lambda X, Y: 0 * X)
    eos = Eos(1e3)
    seq = approx_sequence(v, ScalarField.constant(d, 1.0), eos, 1, 0.1)
    ref = integrate_to(EulerState(v), None, 0.1, dt=seq.dt).final.v
    assert (seq.levels[0].velocity[-1] - ref).max_abs() < 1e-10
    with pytest.raises(ValueError):
        approx_sequence(v, ScalarField.constant(d, 1.0), eos, 4, 0.1)


def test_approx_sequence_markers_and_increments():
    d = DomainSpec.torus(16, 2 * np.pi)
    eos = Eos(1e3)
    seq = approx_sequence(tg(d), ScalarField.constant(d, 1.0), eos, 2, 0.1, track_markers=True)
    inc = seq.increments(1)
    assert len(inc) == 2 and inc[1] < inc[0]
    finc = seq.flow_increments(3)
    assert finc[1] < finc[0]
    exact = integrate_to(CompressibleState(tg(d), ScalarField.zeros(d)), eos, 0.1, dt=seq.dt)
    errs = seq.errors([exact.final.u])
    assert errs[0] > errs[1] > errs[2]


def test_jacobian_matches_finite_difference(torus):
    disp = ScalarField.from_function(torus, lambda X, Y: 0.1 * np.sin(X) * np.cos(Y))
    fl = FlowMap(disp, disp * 0.5, VectorField.zeros(torus))
    a = 1 + partial(disp, 0)
    b = partial(disp, 1)
    c = partial(disp, 0) * 0.5
    e = 1 + partial(disp, 1) * 0.5
    assert (fl.jacobian - (a * e - b * c)).max_abs() < 1e-14


def test_one_dimensional_stretch_density():
    # flow map x + t u0(x): J = 1 + t u0' and the log-density at the marker is -log J
    d = DomainSpec.torus(32, 2 * np.pi)
    t = 0.5
    disp = ScalarField.from_function(d, lambda X, Y: t * 0.1 * np.sin(X))
    fl = FlowMap(disp, ScalarField.zeros(d), VectorField.zeros(d))
    X, _ = d.mesh()
    stretch = 1 + t * 0.1 * np.cos(X)
    assert np.abs(fl.jacobian.values - stretch).max() < 1e-14
    h = density_from_jacobian(fl, ScalarField.zeros(d), transport_initial=False)
    assert np.abs(pullback(h, fl).values + np.log(stretch)).max() < 1e-10
