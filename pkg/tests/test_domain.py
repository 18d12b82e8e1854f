import numpy as np
import pytest
from hypothesis import given, strategies as st

from lowmach.domain import (DiffOp, DomainSpec, Parity, ParityError, ScalarField, VectorField,
                            Wall, delta, differentiate, div, grad, inner, integrate, laplacian,
                            load_snapshot, normal_derivative, partial, random_field,
                            random_vector, save_snapshot, sobolev_norm, trace_norm, wall_trace,
                            export_csv)


def test_domain_validation():
    with pytest.raises(ValueError):
        DomainSpec.torus(30)
    d = DomainSpec.channel(16, 8, lx=2.0)
    assert d.ly == 1.0 and d.area == 2.0
    assert d.shape(Parity.EVEN) == (16, 9)
    assert d.to_dict()["geometry"] == d.geometry.value


def test_round_trip_transform(torus, channel, rng):
    for d, par in ((torus, Parity.PERIODIC), (channel, Parity.EVEN), (channel, Parity.ODD)):
        f = random_field(d, rng, par)
        back = f._from_coeffs(f.coeffs, par)
        assert np.allclose(back.values, f.values, rtol=0, atol=1e-12 * f.max_abs())


def test_parity_wall_conditions(channel, rng):
    even = random_field(channel, rng, Parity.EVEN)
    odd = random_field(channel, rng, Parity.ODD)
    assert np.all(odd.values[:, [0, -1]] == 0)
    dy = partial(even, 1)
    assert dy.parity is Parity.ODD
    assert np.all(dy.values[:, [0, -1]] == 0)


def test_odd_field_rejects_wall_values(channel):
    with pytest.raises(ParityError):
        ScalarField(channel, np.ones(channel.shape(Parity.ODD)), Parity.ODD)
    with pytest.raises(ParityError):
        ScalarField(channel, np.ones(channel.shape(Parity.EVEN)), Parity.PERIODIC)


def test_vector_field_slip_condition(channel, rng):
    u = random_vector(channel, rng)
    assert u.x.parity is Parity.EVEN and u.y.parity is Parity.ODD
    assert np.all(u.y.values[:, [0, -1]] == 0)


def test_derivatives_of_trig_functions(torus):
    f = ScalarField.from_function(torus, lambda X, Y: np.sin(2 * X) * np.cos(3 * Y))
    fx = ScalarField.from_function(torus, lambda X, Y: 2 * np.cos(2 * X) * np.cos(3 * Y))
    assert (partial(f, 0) - fx).max_abs() < 1e-12
    assert (laplacian(f) + f * 13.0).max_abs() < 1e-11
    assert (delta(grad(f)) + laplacian(f)).max_abs() < 1e-11


def test_differentiate_dispatch(torus, rng):
    f = random_field(torus, rng)
    u = random_vector(torus, rng)
    assert (differentiate(f, DiffOp.GRAD) - grad(f)).max_abs() == 0
    assert (differentiate(u, DiffOp.DELTA) - delta(u)).max_abs() == 0
    assert (differentiate(f, DiffOp.LAPLACIAN) - laplacian(f)).max_abs() == 0


@pytest.mark.parametrize("geom", ["torus", "channel"])
def test_adjointness_and_laplacian(geom, rng):
    d = DomainSpec.torus(16, lx=2.0) if geom == "torus" else DomainSpec.channel(16, 16, 1.5)
    f = random_field(d, rng)
    u = random_vector(d, rng)
    lhs = inner(grad(f), u)
    rhs = inner(f, delta(u))
    assert abs(lhs - rhs) <= 1e-12 * (abs(lhs) + 1)
    assert (delta(grad(f)) + laplacian(f)).max_abs() <= 1e-10 * laplacian(f).max_abs()


def test_parseval_and_norm_conventions(torus, rng):
    f = random_field(torus, rng)
    l2 = np.sqrt(integrate(f * f))
    assert abs(sobolev_norm(f, 0) - l2) < 1e-12 * l2
    h1 = np.sqrt(integrate(f * f) + inner(grad(f), grad(f)))
    assert abs(sobolev_norm(f, 1) - h1) < 1e-12 * h1
    assert sobolev_norm(f, 1).convention == "integer"
    assert sobolev_norm(f, 0.5).convention == "fractional"
    with pytest.raises(ValueError):
        sobolev_norm(f, 0.5, "integer")


def test_channel_norm_matches_quadrature(channel, rng):
    f = random_field(channel, rng, Parity.EVEN)
    assert abs(sobolev_norm(f, 0) ** 2 - integrate(f * f)) < 1e-12 * integrate(f * f)


def test_generic_conversion_preserves_calculus(cheb_channel):
    d = cheb_channel
    f = ScalarField.from_function(d, lambda X, Y: np.cos(2 * np.pi * X) * np.cos(np.pi * Y))
    g = f.to_generic()
    assert g.parity is Parity.GENERIC
    exact = ScalarField.from_function(
        d, lambda X, Y: -np.pi * np.cos(2 * np.pi * X) * np.sin(np.pi * Y), Parity.GENERIC)
    assert (partial(g, 1) - exact).max_abs() < 1e-9
    assert abs(integrate(g * g) - integrate(f * f)) < 1e-12
    assert abs(sobolev_norm(g, 2) - sobolev_norm(f, 2)) < 1e-8 * sobolev_norm(f, 2)


def test_trace_norms(channel):
    one = ScalarField.constant(channel, 1.0)
    tr = wall_trace(one, Wall.Y0, 0)
    assert abs(tr.norm - 1.0) < 1e-14
    x = channel.x
    v = np.sin(2 * np.pi * x)
    assert abs(trace_norm(v, 1.0, 0) ** 2 - 0.5) < 1e-14
    assert abs(trace_norm(v, 1.0, 1) ** 2 - 0.5 * (1 + 4 * np.pi ** 2)) < 1e-10


def test_normal_derivative_is_outward(cheb_channel):
    f = ScalarField.from_function(cheb_channel, lambda X, Y: Y + 0 * X, Parity.GENERIC)
    assert np.allclose(normal_derivative(f, Wall.Y0), -1.0)
    assert np.allclose(normal_derivative(f, Wall.Y1), 1.0)


def test_snapshot_round_trip(tmp_path, channel, rng):
    f = random_field(channel, rng, Parity.ODD)
    save_snapshot(tmp_path / "f.lmsnap", f, "f", 0.25)
    g, header = load_snapshot(tmp_path / "f.lmsnap")
    assert header["t"] == 0.25 and g.parity is Parity.ODD
    assert np.array_equal(g.values, f.values) and g.domain == f.domain
    export_csv(tmp_path / "f.csv", f)
    table = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=1)
    assert table.shape == (f.values.size, 3)


def test_parity_algebra(channel, rng):
    e = random_field(channel, rng, Parity.EVEN)
    o = random_field(channel, rng, Parity.ODD)
    assert (e * o).parity is Parity.ODD
    assert (o * o).parity is Parity.EVEN
    with pytest.raises(ParityError):
        e + o


@given(seed=st.integers(0, 2 ** 32 - 1), geom=st.sampled_from(["torus", "channel"]))
def test_property_delta_is_minus_divergence_adjoint(seed, geom):
    rng = np.random.default_rng(seed)
    d = DomainSpec.torus(16, lx=1.0) if geom == "torus" else DomainSpec.channel(16, 8)
    f = random_field(d, rng)
    u = random_vector(d, rng)
    assert (delta(u) + div(u)).max_abs() == 0
    a, b = inner(grad(f), u), inner(f, delta(u))
    assert abs(a - b) <= 1e-11 * (1 + abs(a))


@given(seed=st.integers(0, 2 ** 32 - 1), s=st.floats(0, 4))
def test_property_norms_monotone_in_s(seed, s):
    rng = np.random.default_rng(seed)
    d = DomainSpec.torus(16, lx=2 * np.pi)
    f = random_field(d, rng)
    assert sobolev_norm(f, s, "fractional") >= sobolev_norm(f, 0) * (1 - 1e-12)
    assert sobolev_norm(f, 0, "fractional") == pytest.approx(sobolev_norm(f, 0, "integer"))


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_property_vector_linearity(seed):
    rng = np.random.default_rng(seed)
    d = DomainSpec.channel(8, 8)
    u, v = random_vector(d, rng), random_vector(d, rng)
    w = u * 2.0 - v
    assert (div(w) - (div(u) * 2.0 - div(v))).max_abs() < 1e-12 * (1 + div(w).max_abs())
    assert isinstance(w, VectorField)
