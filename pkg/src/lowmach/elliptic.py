"""Inverse Laplacian, Neumann extensions, Helmholtz projections and the
variable-coefficient operator L f = div(c2 grad f) with its Neumann-series
inverse.

All inverses return mean-zero solutions.  On the channel, problems with
reflection-symmetric data are solved spectrally on the cosine grid; problems
with nonzero Neumann data are solved on the Chebyshev grid, one small dense
system per x-wavenumber.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .domain import (Parity, ScalarField, Wall, cheb_matrices, delta, div, grad,
                     integrate, normal_derivative, sobolev_norm, trace_norm)


class IncompatibleDataError(ValueError):
    def __init__(self, defect):
        super().__init__(f"Neumann data incompatible with source: defect {defect:.3e}")
        self.defect = defect


class SeriesDivergedError(ArithmeticError):
    def __init__(self, rho, iterations):
        super().__init__(f"Neumann series diverged (ratio {rho:.3f} after {iterations} "
                         "iterations); increase k")
        self.rho = rho
        self.iterations = iterations


@dataclass(frozen=True)
class NeumannData:
    """Outward normal derivatives on the two walls (arrays of length nx)."""

    y0: np.ndarray
    y1: np.ndarray

    @classmethod
    def zeros(cls, nx):
        return cls(np.zeros(nx), np.zeros(nx))

    @classmethod
    def of(cls, f):
        return cls(normal_derivative(f, Wall.Y0), normal_derivative(f, Wall.Y1))

    def flux(self, lx):
        """Boundary integral of the data."""
        return lx * (np.mean(self.y0) + np.mean(self.y1))

    def scaled(self, s):
        return NeumannData(s * np.asarray(self.y0), s * np.asarray(self.y1))

    def divide(self, field):
        """Divide pointwise by the wall values of ``field``."""
        return NeumannData(self.y0 / field.values[:, 0], self.y1 / field.values[:, -1])

    def is_zero(self):
        return not (np.any(self.y0) or np.any(self.y1))

    def norm(self, lx, s=0.0):
        return float(np.hypot(trace_norm(self.y0, lx, s), trace_norm(self.y1, lx, s)))

    def __add__(self, other):
        return NeumannData(self.y0 + other.y0, self.y1 + other.y1)

    def __neg__(self):
        return self.scaled(-1.0)


@dataclass(frozen=True)
class MeanSplit:
    f1: ScalarField
    f2: float


def mean_split(f):
    m = f.mean()
    return MeanSplit(f - m, m)


# ------------------------------------------------------------ Laplace solves


def _spectral_inverse_laplacian(rhs):
    d = rhs.domain
    k2 = d.kx[:, None] ** 2 + d.ky[None, :] ** 2
    k2[0, 0] = 1.0
    c = -rhs.coeffs / k2
    c[0, 0] = 0.0
    return rhs._from_coeffs(c, rhs.parity)


@lru_cache(maxsize=16)
def _cheb_neumann_operators(nx, lx, m):
    """Per-wavenumber inverse matrices for the Chebyshev Neumann problem.

    Row layout: interior rows hold the PDE, rows 0 and m hold the outward
    normal derivative.  The k = 0 block is augmented with a Lagrange
    multiplier that fixes the Clenshaw-Curtis mean to zero.
    """
    dy, w = cheb_matrices(m)
    d2 = dy @ dy
    kx = 2 * np.pi * np.fft.fftfreq(nx, d=lx / nx)
    invs = np.empty((nx, m + 1, m + 1))
    for i, k in enumerate(kx):
        if i == 0:
            continue
        a = d2 - k * k * np.eye(m + 1)
        a[0] = -dy[0]
        a[m] = dy[m]
        invs[i] = np.linalg.inv(a)
    a0 = np.zeros((m + 2, m + 2))
    a0[: m + 1, : m + 1] = d2
    a0[1:m, m + 1] = 1.0
    a0[0, : m + 1] = -dy[0]
    a0[m, : m + 1] = dy[m]
    a0[m + 1, : m + 1] = w
    inv0 = np.linalg.inv(a0)
    invs.setflags(write=False)
    inv0.setflags(write=False)
    return invs, inv0


def _cheb_neumann_solve(rhs_values, data, domain):
    """Solve on the Chebyshev grid; returns (values, interior constant)."""
    m = domain.ncheb
    invs, inv0 = _cheb_neumann_operators(domain.nx, domain.lx, m)
    r = np.array(rhs_values, dtype=float)
    r[:, 0] = data.y0
    r[:, m] = data.y1
    rh = np.fft.fft(r, axis=0)
    gh = np.einsum("kij,kj->ki", invs[1:], rh[1:])
    b0 = np.concatenate([rh[0], [0.0]])
    s0 = inv0 @ b0
    g = np.empty_like(rh)
    g[1:] = gh
    g[0] = s0[: m + 1]
    return np.real(np.fft.ifft(g, axis=0)), float(np.real(s0[m + 1])) / domain.nx


def _compat_defect(rhs, data):
    d = rhs.domain
    total = integrate(rhs)
    flux = 0.0 if data is None else data.flux(d.lx)
    scale = max(abs(total), abs(flux), sobolev_norm(rhs, 0) * np.sqrt(d.area),
                0.0 if data is None else data.norm(d.lx) * np.sqrt(d.lx), 1.0)
    return total - flux, scale


def laplace_solve(rhs, neumann_data=None, check=True):
    """Mean-zero ``g`` with ``lap g = rhs`` and outward derivative ``neumann_data``.

    ``check=False`` skips the compatibility test; the constant part of the
    source that cannot be matched is then silently dropped, which is how the
    inverse works modulo constants.
    """
    d = rhs.domain
    if not d.is_channel:
        if neumann_data is not None:
            raise ValueError("the torus has no boundary data")
        if check:
            defect, scale = _compat_defect(rhs, None)
            if abs(defect) > 1e-10 * scale:
                raise IncompatibleDataError(defect)
        return _spectral_inverse_laplacian(rhs)
    if check:
        defect, scale = _compat_defect(rhs, neumann_data)
        if abs(defect) > 1e-10 * scale:
            raise IncompatibleDataError(defect)
    zero_data = neumann_data is None or neumann_data.is_zero()
    if zero_data and rhs.parity is Parity.EVEN:
        return _spectral_inverse_laplacian(rhs)
    if neumann_data is None:
        neumann_data = NeumannData.zeros(d.nx)
    r = rhs.to_generic()
    vals, _ = _cheb_neumann_solve(r.values, neumann_data, d)
    return ScalarField(d, vals, Parity.GENERIC)


def inverse_laplacian(rhs):
    """Neumann-zero, mean-zero inverse acting modulo constants."""
    return laplace_solve(rhs - rhs.mean() if rhs.parity is not Parity.ODD else rhs,
                         None, check=False)


def neumann_extension(data, domain):
    """Mean-zero ``g`` with ``lap g = const`` and outward derivative ``data``.

    The constant is ``flux(data)/area``; it vanishes when the data have zero
    boundary integral, in which case ``g`` is the harmonic extension.
    """
    if not domain.is_channel:
        raise ValueError("the torus has no boundary")
    c = data.flux(domain.lx) / domain.area
    rhs = ScalarField.constant(domain, c, Parity.GENERIC)
    vals, _ = _cheb_neumann_solve(rhs.values, data, domain)
    return ScalarField(domain, vals, Parity.GENERIC)


# ------------------------------------------------------------ projections


def helmholtz_decompose(w):
    """Split ``w`` into a divergence-free part and a gradient part.

    The gradient part is ``grad g`` with ``lap g = div w`` and
    ``d g/d nu = <w, nu>``.
    """
    if w.domain.is_channel and w.x.parity is Parity.ODD:
        w = w.to_generic()
    q = grad(gradient_potential(w))
    return w - q, q


def project_p(w):
    return helmholtz_decompose(w)[0]


def project_q(w):
    return helmholtz_decompose(w)[1]


def gradient_potential(w):
    """Mean-zero ``g`` with ``grad g = Q w``."""
    if w.domain.is_channel and w.x.parity is Parity.ODD:
        w = w.to_generic()
    if not w.is_generic:
        return laplace_solve(div(w), None, check=False)
    data = NeumannData(-w.y.values[:, 0], w.y.values[:, -1])
    return laplace_solve(div(w), data, check=False)


# ------------------------------------------------------------------ L family


class LOperator:
    """``L f = div(c2 grad f) = -delta(c2 grad f)`` for a positive ``c2``."""

    def __init__(self, c2, k):
        if c2.min() <= 0:
            raise ValueError("c2 must be positive")
        self.c2 = c2
        self.k = float(k)
        self.domain = c2.domain

    @property
    def smallness(self):
        """``||c2/k - 1||_4``, the size that governs the Neumann series."""
        return float(sobolev_norm(self.c2 / self.k - 1.0, 4))

    def apply(self, f):
        c2 = self.c2
        if f.is_generic and not c2.is_generic:
            c2 = c2.to_generic()
        return -delta(grad(f) * c2)

    __call__ = apply


class LMode(enum.Enum):
    INVERSE = "inverse"
    GL = "gl"


@dataclass
class LSolveResult:
    field: ScalarField
    iterations: int
    ratios: list = field(default_factory=list)
    residual: float = 0.0
    constant_defect: float = 0.0

    @property
    def contraction(self):
        """Geometric mean of the per-iteration residual ratios."""
        r = [x for x in self.ratios if x > 0]
        if not r:
            return 0.0
        return float(np.exp(np.mean(np.log(r))))


def _interior(values, generic):
    return values[:, 1:-1] if generic else values


def _residual_norm(res, generic):
    v = _interior(res.values, generic)
    c = v.mean()
    return float(np.sqrt(np.mean((v - c) ** 2))), float(c)


def _inverse_series(op, rhs, tol, max_iter):
    generic = rhs.is_generic or op.c2.is_generic
    if generic:
        rhs = rhs.to_generic()
    rhs_norm, _ = _residual_norm(rhs, generic)
    zero = ScalarField.zeros(rhs.domain, rhs.parity)
    if rhs_norm == 0.0:
        return LSolveResult(zero, 0, [], 0.0, 0.0)
    y = rhs
    f = zero
    res = rhs
    prev = rhs_norm
    ratios = []
    growing = 0
    for it in range(1, max_iter + 1):
        f = inverse_laplacian(y) / op.k
        res = rhs - op.apply(f)
        r, _ = _residual_norm(res, generic)
        ratios.append(r / prev)
        if r <= tol * rhs_norm:
            _, c = _residual_norm(res, generic)
            return LSolveResult(f, it, ratios, r / rhs_norm, c)
        growing = growing + 1 if r >= prev else 0
        if growing >= 2:
            raise SeriesDivergedError(ratios[-1], it)
        prev = r
        y = y + res
    rho = float(np.exp(np.mean(np.log(ratios[-5:]))))
    if rho >= 1.0:
        raise SeriesDivergedError(rho, max_iter)
    _, c = _residual_norm(res, generic)
    return LSolveResult(f, max_iter, ratios, prev / rhs_norm, c)


def l_solve(op, rhs=None, neumann_data=None, mode=LMode.INVERSE, tol=1e-9, max_iter=200):
    """Invert ``L`` by the Neumann series ``y <- rhs + (I - L lap^{-1}/k) y``.

    INVERSE: mean-zero ``f`` with ``L f = rhs`` (modulo constants) and zero
    Neumann data.  GL: ``f = G(h) - L^{-1} L G(h)`` with ``G`` the Neumann
    extension of ``h``, so ``L f`` is constant and ``d f/d nu = h``.
    """
    mode = LMode(mode)
    d = op.domain
    if mode is LMode.INVERSE:
        if rhs is None:
            raise ValueError("INVERSE mode needs a right-hand side")
        if rhs.parity is not Parity.GENERIC and rhs.parity is not Parity.ODD:
            rhs = rhs - rhs.mean()
        return _inverse_series(op, rhs, tol, max_iter)
    if neumann_data is None:
        raise ValueError("GL mode needs Neumann data")
    g = neumann_extension(neumann_data, d)
    lg = op.apply(g)
    lg = lg - lg.mean()
    inner_res = _inverse_series(op, lg, tol, max_iter)
    f = g - inner_res.field
    f = f - f.mean()
    return LSolveResult(f, inner_res.iterations, inner_res.ratios, inner_res.residual,
                        inner_res.constant_defect)


def l_inverse(op, rhs, **kw):
    return l_solve(op, rhs, mode=LMode.INVERSE, **kw).field


def g_l(op, data, **kw):
    return l_solve(op, None, data, mode=LMode.GL, **kw).field


def measure_inverse_norm(op, rng, samples=4, s=0):
    """Largest observed ``||L^{-1} r||_s / ||r||_s`` over random inputs."""
    from .domain import random_field
    par = Parity.EVEN if op.domain.is_channel else Parity.PERIODIC
    best = 0.0
    for _ in range(samples):
        r = random_field(op.domain, rng, par)
        r = r - r.mean()
        f = l_inverse(op, r)
        best = max(best, float(sobolev_norm(f, s)) / float(sobolev_norm(r, s)))
    return best


def measure_gl_norm(op, rng, samples=4, s_volume=1, s_boundary=0.5, modes=4):
    """Largest observed ``||G_L h||_{s_volume} / ||h||_{boundary}``."""
    d = op.domain
    x = d.x
    best = 0.0
    for _ in range(samples):
        a = rng.standard_normal((2, modes)) + 1j * rng.standard_normal((2, modes))
        h = []
        for wall in range(2):
            v = np.zeros_like(x)
            for m in range(1, modes + 1):
                v += np.real(a[wall, m - 1] * np.exp(2j * np.pi * m * x / d.lx)) / m
            h.append(v)
        data = NeumannData(h[0], h[1])
        f = g_l(op, data)
        best = max(best, float(sobolev_norm(f, s_volume)) / data.norm(d.lx, s_boundary))
    return best
