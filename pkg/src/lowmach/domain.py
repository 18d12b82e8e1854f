"""Grids, sampled fields, spectral calculus and Sobolev norms.

Two geometries are supported.  On the torus both directions are Fourier.
On the channel ``[0, lx) x [0, 1]`` the x direction is Fourier and the y
direction uses a cosine expansion (``EVEN``) or a sine expansion (``ODD``)
on the uniform grid ``y_j = j/ny`` including both walls.  Both are realised
by even/odd extension to a period-2 grid, so every derivative is an exact
mode multiplier.

Channel data without reflection symmetry (needed for boundary-value
problems with nonzero normal derivatives) use the ``GENERIC`` parity, which
samples y on Chebyshev-Lobatto points and differentiates with the
Chebyshev collocation matrix.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import comb
from pathlib import Path

import numpy as np


class Geometry(enum.Enum):
    TORUS = "torus"
    CHANNEL = "channel"


class Parity(enum.Enum):
    PERIODIC = "periodic"
    EVEN = "even"
    ODD = "odd"
    GENERIC = "generic"


class Wall(enum.Enum):
    Y0 = 0
    Y1 = 1


class ParityError(ValueError):
    """Field parities are inconsistent with the requested operation."""


class DiffOp(enum.Enum):
    GRAD = "grad"
    DELTA = "delta"
    LAPLACIAN = "laplacian"


def _is_pow2(n):
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class DomainSpec:
    """Geometry plus resolution.

    ``ncheb`` is the number of Chebyshev intervals used for ``GENERIC``
    channel fields; it defaults to ``ny``.
    """

    geometry: Geometry
    nx: int
    ny: int
    lx: float = 1.0
    ncheb: int | None = None

    def __post_init__(self):
        if not isinstance(self.geometry, Geometry):
            object.__setattr__(self, "geometry", Geometry(self.geometry))
        if not (_is_pow2(self.nx) and _is_pow2(self.ny)):
            raise ValueError(f"grid sizes must be powers of two, got {self.nx}x{self.ny}")
        if not self.lx > 0:
            raise ValueError("lx must be positive")
        if self.ncheb is None:
            object.__setattr__(self, "ncheb", self.ny)
        if self.ncheb < 4:
            raise ValueError("ncheb must be at least 4")

    @classmethod
    def torus(cls, n, lx=1.0, ny=None):
        return cls(Geometry.TORUS, n, n if ny is None else ny, lx)

    @classmethod
    def channel(cls, nx, ny, lx=1.0, ncheb=None):
        return cls(Geometry.CHANNEL, nx, ny, lx, ncheb)

    @property
    def is_channel(self):
        return self.geometry is Geometry.CHANNEL

    @property
    def ly(self):
        # torus is square; the channel has unit height
        return self.lx if self.geometry is Geometry.TORUS else 1.0

    @property
    def area(self):
        return self.lx * self.ly

    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return self.ly / self.ny

    @cached_property
    def x(self):
        return np.arange(self.nx) * self.dx

    @cached_property
    def y(self):
        if self.is_channel:
            return np.arange(self.ny + 1) / self.ny
        return np.arange(self.ny) * self.dy

    @cached_property
    def y_cheb(self):
        m = self.ncheb
        return 0.5 * (1.0 - np.cos(np.pi * np.arange(m + 1) / m))

    def shape(self, parity):
        if parity is Parity.GENERIC:
            return (self.nx, self.ncheb + 1)
        if self.is_channel:
            return (self.nx, self.ny + 1)
        return (self.nx, self.ny)

    def mesh(self, parity=Parity.PERIODIC):
        ys = self.y_cheb if parity is Parity.GENERIC else self.y
        return np.meshgrid(self.x, ys, indexing="ij")

    # spectral bookkeeping on the (possibly doubled) periodic grid
    @cached_property
    def ny_ext(self):
        return 2 * self.ny if self.is_channel else self.ny

    @cached_property
    def ly_ext(self):
        return 2.0 if self.is_channel else self.ly

    @cached_property
    def kx(self):
        return 2 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    @cached_property
    def ky(self):
        return 2 * np.pi * np.fft.rfftfreq(self.ny_ext, d=self.ly_ext / self.ny_ext)

    @cached_property
    def ky_full(self):
        return 2 * np.pi * np.fft.fftfreq(self.ny_ext, d=self.ly_ext / self.ny_ext)

    @cached_property
    def _odd_masks(self):
        # Nyquist modes are dropped for odd-order derivatives
        mx = np.ones(self.nx)
        mx[self.nx // 2] = 0.0
        my = np.ones(self.ny_ext // 2 + 1)
        my[-1] = 0.0
        return mx, my

    @cached_property
    def dealias_mask(self):
        mx = np.abs(np.fft.fftfreq(self.nx, d=1.0 / self.nx))
        my = np.arange(self.ny_ext // 2 + 1)
        keep_x = mx <= self.nx / 3.0
        keep_y = my <= self.ny_ext / 3.0
        return np.outer(keep_x, keep_y)

    def to_dict(self):
        return {"geometry": self.geometry.value, "nx": self.nx, "ny": self.ny,
                "lx": self.lx, "ncheb": self.ncheb}


# ----------------------------------------------------------------- Chebyshev


@lru_cache(maxsize=None)
def cheb_matrices(m):
    """Differentiation matrix d/dy and Clenshaw-Curtis weights on [0, 1].

    Nodes are ``y_j = (1 - cos(pi j/m))/2`` in increasing order.
    """
    j = np.arange(m + 1)
    xc = np.cos(np.pi * j / m)
    c = np.ones(m + 1)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** j
    dxm = xc[:, None] - xc[None, :]
    d = np.outer(c, 1.0 / c) / (dxm + np.eye(m + 1))
    d = d - np.diag(d.sum(axis=1))
    dy = -2.0 * d  # s = -x and y = (s+1)/2

    theta = np.pi * j / m
    w = np.zeros(m + 1)
    v = np.ones(m - 1)
    inner = slice(1, m)
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m * m - 1)
        for kk in range(1, m // 2):
            v -= 2 * np.cos(2 * kk * theta[inner]) / (4 * kk * kk - 1)
        v -= np.cos(m * theta[inner]) / (m * m - 1)
    else:
        w[0] = w[m] = 1.0 / (m * m)
        for kk in range(1, (m - 1) // 2 + 1):
            v -= 2 * np.cos(2 * kk * theta[inner]) / (4 * kk * kk - 1)
    w[inner] = 2 * v / m
    dy.setflags(write=False)
    w = 0.5 * w
    w.setflags(write=False)
    return dy, w


def _extend(values, parity):
    if parity is Parity.EVEN:
        return np.concatenate([values, values[:, -2:0:-1]], axis=1)
    if parity is Parity.ODD:
        return np.concatenate([values, -values[:, -2:0:-1]], axis=1)
    return values


@lru_cache(maxsize=64)
def _parity_to_cheb_matrix(ny, m):
    """Real matrix evaluating the period-2 trig interpolant at Chebyshev nodes."""
    n2 = 2 * ny
    y = 0.5 * (1.0 - np.cos(np.pi * np.arange(m + 1) / m))
    freq = np.fft.fftfreq(n2, d=1.0 / n2)
    e = np.exp(1j * np.pi * np.outer(y, freq)) / n2
    f = np.fft.fft(np.eye(n2), axis=0)
    b = np.real(e @ f)
    b.setflags(write=False)
    return b


# ------------------------------------------------------------------- fields

_MUL = {
    (Parity.EVEN, Parity.EVEN): Parity.EVEN,
    (Parity.ODD, Parity.ODD): Parity.EVEN,
    (Parity.EVEN, Parity.ODD): Parity.ODD,
    (Parity.ODD, Parity.EVEN): Parity.ODD,
    (Parity.PERIODIC, Parity.PERIODIC): Parity.PERIODIC,
}

_FLIP = {Parity.EVEN: Parity.ODD, Parity.ODD: Parity.EVEN,
         Parity.PERIODIC: Parity.PERIODIC, Parity.GENERIC: Parity.GENERIC}


class ScalarField:
    """Immutable sampled scalar field.

    Grid values are the primary data; transform coefficients are computed on
    first use and cached.
    """

    __array_priority__ = 100

    def __init__(self, domain, values, parity=None, name=""):
        if parity is None:
            parity = Parity.EVEN if domain.is_channel else Parity.PERIODIC
        parity = Parity(parity)
        if domain.is_channel and parity is Parity.PERIODIC:
            raise ParityError("channel fields need EVEN, ODD or GENERIC parity")
        if not domain.is_channel and parity is not Parity.PERIODIC:
            raise ParityError("torus fields are PERIODIC")
        v = np.array(values, dtype=float)
        if v.shape != domain.shape(parity):
            raise ValueError(f"values shape {v.shape} != {domain.shape(parity)}")
        if parity is Parity.ODD:
            walls = np.abs(v[:, [0, -1]]).max()
            scale = max(np.abs(v).max(), 1.0)
            if walls > 1e-9 * scale:
                raise ParityError(f"ODD field has wall values of size {walls:.3e}")
            v[:, 0] = 0.0
            v[:, -1] = 0.0
        v.setflags(write=False)
        self.domain = domain
        self.values = v
        self.parity = parity
        self.name = name

    # construction helpers
    @classmethod
    def from_function(cls, domain, func, parity=None, name=""):
        if parity is None:
            parity = Parity.EVEN if domain.is_channel else Parity.PERIODIC
        X, Y = domain.mesh(Parity(parity))
        return cls(domain, np.broadcast_to(func(X, Y), X.shape), parity, name)

    @classmethod
    def zeros(cls, domain, parity=None):
        if parity is None:
            parity = Parity.EVEN if domain.is_channel else Parity.PERIODIC
        return cls(domain, np.zeros(domain.shape(Parity(parity))), parity)

    @classmethod
    def constant(cls, domain, c, parity=None):
        return cls.zeros(domain, parity) + c

    @property
    def is_generic(self):
        return self.parity is Parity.GENERIC

    @cached_property
    def extended(self):
        return _extend(self.values, self.parity)

    @cached_property
    def coeffs(self):
        """rfft2 coefficients of the (extended) periodic samples."""
        if self.is_generic:
            raise ParityError("GENERIC fields have no Fourier-y coefficients")
        return np.fft.rfft2(self.extended)

    def _from_coeffs(self, c, parity):
        ext = np.fft.irfft2(c, s=(self.domain.nx, self.domain.ny_ext))
        if self.domain.is_channel:
            ext = ext[:, : self.domain.ny + 1].copy()
            if parity is Parity.ODD:
                ext[:, 0] = 0.0
                ext[:, -1] = 0.0
        return ScalarField(self.domain, ext, parity)

    def _new(self, values, parity=None):
        return ScalarField(self.domain, values, self.parity if parity is None else parity)

    def to_generic(self):
        """Exact evaluation of the y-expansion at the Chebyshev nodes."""
        if self.is_generic:
            return self
        if not self.domain.is_channel:
            raise ParityError("GENERIC representation exists only on the channel")
        b = _parity_to_cheb_matrix(self.domain.ny, self.domain.ncheb)
        return ScalarField(self.domain, self.extended @ b.T, Parity.GENERIC, self.name)

    # pointwise algebra
    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.domain != self.domain:
                raise ValueError("fields live on different domains")
            a, b = self, other
            if a.parity is not b.parity and Parity.GENERIC in (a.parity, b.parity):
                a, b = a.to_generic(), b.to_generic()
            return a, b
        return self, None

    def __add__(self, other):
        a, b = self._coerce(other)
        if b is None:
            if other != 0 and a.parity is Parity.ODD:
                raise ParityError("adding a constant to an ODD field")
            return a._new(a.values + other)
        if a.parity is not b.parity:
            raise ParityError(f"cannot add {a.parity.value} and {b.parity.value} fields")
        return a._new(a.values + b.values)

    __radd__ = __add__

    def __neg__(self):
        return self._new(-self.values)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._coerce(other)
        if b is None:
            return a._new(a.values * other)
        if a.is_generic:
            return a._new(a.values * b.values, Parity.GENERIC)
        return a._new(a.values * b.values, _MUL[(a.parity, b.parity)])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScalarField):
            a, b = self._coerce(other)
            if b.parity is Parity.ODD:
                raise ParityError("division by an ODD field")
            return a._new(a.values / b.values)
        return self._new(self.values / other)

    def __pow__(self, p):
        if self.parity is Parity.ODD and p != int(p):
            raise ParityError("non-integer power of an ODD field")
        par = self.parity
        if par is Parity.ODD and int(p) % 2 == 0:
            par = Parity.EVEN
        return self._new(self.values ** p, par)

    def map(self, func, odd_function=False):
        """Apply a pointwise function.

        ODD inputs are accepted only when the caller states that ``func`` is
        odd, in which case the result stays ODD.
        """
        if self.parity is Parity.ODD and not odd_function:
            raise ParityError("pointwise map of an ODD field needs an odd function")
        return self._new(func(self.values))

    def max_abs(self):
        return float(np.abs(self.values).max())

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())

    def integral(self):
        return float(integrate(self))

    def mean(self):
        return self.integral() / self.domain.area

    def dealiased(self):
        if self.is_generic:
            return self
        return self._from_coeffs(self.coeffs * self.domain.dealias_mask, self.parity)

    def __repr__(self):
        d = self.domain
        return (f"ScalarField({d.geometry.value} {d.nx}x{d.ny}, {self.parity.value}"
                f"{', ' + self.name if self.name else ''})")


class VectorField:
    """Pair of scalar components with admissible parity pairing."""

    __array_priority__ = 100

    def __init__(self, x, y):
        if x.domain != y.domain:
            raise ValueError("components on different domains")
        if x.domain.is_channel:
            pair = (x.parity, y.parity)
            ok = {(Parity.EVEN, Parity.ODD), (Parity.ODD, Parity.EVEN),
                  (Parity.GENERIC, Parity.GENERIC)}
            if pair not in ok:
                if Parity.GENERIC in pair:
                    x, y = x.to_generic(), y.to_generic()
                else:
                    raise ParityError(f"inadmissible vector parity {pair}")
        self.x = x
        self.y = y
        self.domain = x.domain

    @classmethod
    def from_function(cls, domain, fx, fy, generic=False):
        if domain.is_channel:
            px, py = (Parity.GENERIC, Parity.GENERIC) if generic else (Parity.EVEN, Parity.ODD)
        else:
            px = py = Parity.PERIODIC
        return cls(ScalarField.from_function(domain, fx, px),
                   ScalarField.from_function(domain, fy, py))

    @classmethod
    def zeros(cls, domain, generic=False):
        return cls.from_function(domain, lambda X, Y: 0 * X, lambda X, Y: 0 * X, generic)

    @property
    def components(self):
        return (self.x, self.y)

    @property
    def is_generic(self):
        return self.x.is_generic

    def to_generic(self):
        return VectorField(self.x.to_generic(), self.y.to_generic())

    def __add__(self, other):
        return VectorField(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return VectorField(self.x - other.x, self.y - other.y)

    def __neg__(self):
        return VectorField(-self.x, -self.y)

    def __mul__(self, s):
        if isinstance(s, VectorField):
            raise TypeError("use dot() for vector products")
        return VectorField(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return VectorField(self.x / s, self.y / s)

    def dot(self, other):
        return self.x * other.x + self.y * other.y

    def dealiased(self):
        return VectorField(self.x.dealiased(), self.y.dealiased())

    def max_abs(self):
        return float(np.sqrt(self.x.values ** 2 + self.y.values ** 2).max())

    def __repr__(self):
        return f"VectorField({self.x!r}, {self.y!r})"


# ----------------------------------------------------------------- calculus


def partial(f, axis, order=1):
    """Exact partial derivative along ``axis`` (0 = x, 1 = y)."""
    d = f.domain
    if order == 0:
        return f
    if f.is_generic:
        v = f.values
        if axis == 0:
            c = np.fft.fft(v, axis=0)
            k = d.kx.copy()
            if order % 2:
                k[d.nx // 2] = 0.0
            v = np.real(np.fft.ifft(c * ((1j * k) ** order)[:, None], axis=0))
        else:
            dy, _ = cheb_matrices(d.ncheb)
            for _ in range(order):
                v = v @ dy.T
        return ScalarField(d, v, Parity.GENERIC)
    c = f.coeffs
    mx, my = d._odd_masks
    if axis == 0:
        mult = (1j * d.kx) ** order
        if order % 2:
            mult = mult * mx
        c = c * mult[:, None]
    else:
        mult = (1j * d.ky) ** order
        if order % 2:
            mult = mult * my
        c = c * mult[None, :]
    par = _FLIP[f.parity] if (axis == 1 and order % 2) else f.parity
    return f._from_coeffs(c, par)


def grad(f):
    return VectorField(partial(f, 0), partial(f, 1))


def div(u):
    return partial(u.x, 0) + partial(u.y, 1)


def delta(u):
    """The operator -div, the formal adjoint of the gradient."""
    return -div(u)


def laplacian(f):
    if f.is_generic:
        return partial(f, 0, 2) + partial(f, 1, 2)
    d = f.domain
    k2 = d.kx[:, None] ** 2 + d.ky[None, :] ** 2
    return f._from_coeffs(-k2 * f.coeffs, f.parity)


def differentiate(field, op):
    op = DiffOp(op)
    if op is DiffOp.GRAD:
        if not isinstance(field, ScalarField):
            raise TypeError("Grad needs a scalar field")
        return grad(field)
    if op is DiffOp.DELTA:
        if not isinstance(field, VectorField):
            raise TypeError("Delta needs a vector field")
        return delta(field)
    if not isinstance(field, ScalarField):
        raise TypeError("Laplacian needs a scalar field")
    return laplacian(field)


def advect(u, f):
    """Directional derivative u . grad f for scalar or vector ``f``."""
    if isinstance(f, VectorField):
        return VectorField(advect(u, f.x), advect(u, f.y))
    return u.x * partial(f, 0) + u.y * partial(f, 1)


def velocity_gradient(u):
    """Matrix ``G[i][j] = d u_i / d x_j``."""
    return [[partial(u.x, 0), partial(u.x, 1)], [partial(u.y, 0), partial(u.y, 1)]]


def dealias(field):
    return field.dealiased()


# ------------------------------------------------------------ integrals/norms


def integrate(f):
    d = f.domain
    if f.is_generic:
        _, w = cheb_matrices(d.ncheb)
        return d.dx * float(np.sum(f.values @ w))
    if d.is_channel:
        # trapezoid in y, exact for the cosine expansion
        v = f.values
        return d.dx * d.dy * float(v[:, 1:-1].sum() + 0.5 * (v[:, 0].sum() + v[:, -1].sum()))
    return d.dx * d.dy * float(f.values.sum())


def inner(a, b):
    """L2 inner product of two scalar or two vector fields."""
    if isinstance(a, VectorField):
        return inner(a.x, b.x) + inner(a.y, b.y)
    return integrate(a * b)


class Norm(float):
    """A float that also records the norm convention used."""

    convention: str

    def __new__(cls, value, convention):
        obj = super().__new__(cls, value)
        obj.convention = convention
        return obj


def _convention(s, convention):
    if convention == "auto":
        return "integer" if float(s).is_integer() else "fractional"
    if convention not in ("integer", "fractional"):
        raise ValueError(f"unknown norm convention {convention!r}")
    if convention == "integer" and not float(s).is_integer():
        raise ValueError("integer convention needs integer s")
    return convention


def _weights(k2, s, conv):
    if conv == "integer":
        w = np.zeros_like(k2)
        for ell in range(int(s) + 1):
            w = w + k2 ** ell
        return w
    return (1.0 + k2) ** s


def sobolev_norm(f, s=0, convention="auto"):
    """Discrete H^s norm.

    Integer ``s`` uses the weight ``sum_{l<=s} |k|^{2l}`` (the norm built from
    all derivatives up to order ``s``); other ``s`` use ``(1+|k|^2)^s``.  Both
    agree at ``s = 0`` with the L2 norm over the domain.
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    conv = _convention(s, convention)
    if isinstance(f, VectorField):
        a = sobolev_norm(f.x, s, conv)
        b = sobolev_norm(f.y, s, conv)
        return Norm(np.hypot(a, b), conv)
    d = f.domain
    if f.is_generic:
        if conv != "integer":
            raise ValueError("GENERIC fields support integer s only")
        total = 0.0
        for ell in range(int(s) + 1):
            for a in range(ell + 1):
                g = partial(partial(f, 0, a), 1, ell - a)
                total += comb(ell, a) * integrate(g * g)
        return Norm(np.sqrt(max(total, 0.0)), conv)
    c = np.fft.fft2(f.extended) / (d.nx * d.ny_ext)
    k2 = d.kx[:, None] ** 2 + d.ky_full[None, :] ** 2
    area_ext = d.lx * d.ly_ext
    total = area_ext * np.sum(_weights(k2, s, conv) * np.abs(c) ** 2)
    if d.is_channel:
        total *= 0.5
    return Norm(np.sqrt(total), conv)


def trace_norm(values, lx, s=0, convention="auto"):
    """Spectral H^s norm of a periodic 1D function on [0, lx)."""
    conv = _convention(s, convention)
    v = np.asarray(values, dtype=float)
    n = v.size
    c = np.fft.fft(v) / n
    k = 2 * np.pi * np.fft.fftfreq(n, d=lx / n)
    return Norm(np.sqrt(lx * np.sum(_weights(k * k, s, conv) * np.abs(c) ** 2)), conv)


@dataclass(frozen=True)
class WallTrace:
    values: np.ndarray
    wall: Wall
    s: float
    norm: float
    restriction_ratio: float | None


def wall_values(f, wall):
    if not f.domain.is_channel:
        raise ValueError("the torus has no boundary")
    return f.values[:, 0 if Wall(wall) is Wall.Y0 else -1].copy()


def normal_derivative(f, wall):
    """Outward normal derivative at a flat wall (normal is -e_y at Y0)."""
    dfy = partial(f, 1)
    v = wall_values(dfy, wall)
    return -v if Wall(wall) is Wall.Y0 else v


def wall_trace(f, wall, s=0):
    """Trace of ``f`` on a wall with its boundary norm.

    The ratio ``||R f||_{s-1/2} / ||f||_s`` is reported when ``s >= 1/2`` and
    the volume norm is available for the field's representation.
    """
    wall = Wall(wall)
    vals = wall_values(f, wall)
    lx = f.domain.lx
    norm = trace_norm(vals, lx, s)
    ratio = None
    if s >= 0.5:
        try:
            vol = sobolev_norm(f, s)
        except ValueError:
            vol = None
        if vol:
            ratio = float(trace_norm(vals, lx, s - 0.5)) / float(vol)
    return WallTrace(vals, wall, s, float(norm), ratio)


def boundary_norm(traces, lx, s):
    """Combined boundary norm of per-wall traces ``{Wall: values}``."""
    return float(np.sqrt(sum(trace_norm(v, lx, s) ** 2 for v in traces.values())))


# ------------------------------------------------------------ random fields


def random_field(domain, rng, parity=None, kmax=None, decay=2.0, amplitude=1.0):
    """Random smooth band-limited field with algebraic spectral decay.

    Modes are confined to the dealiased band so quadratic products stay
    exactly representable.  ``kmax`` caps the mode index in each direction.
    """
    if parity is None:
        parity = Parity.EVEN if domain.is_channel else Parity.PERIODIC
    parity = Parity(parity)
    if parity is Parity.GENERIC:
        return random_field(domain, rng, Parity.EVEN, kmax, decay, amplitude).to_generic()
    nx, nyx = domain.nx, domain.ny_ext
    mx = np.abs(np.fft.fftfreq(nx, d=1.0 / nx))
    my = np.fft.rfftfreq(nyx, d=1.0 / nyx)
    keep = (mx[:, None] <= nx // 3) & (my[None, :] <= nyx // 3)
    if kmax is not None:
        keep &= (mx[:, None] <= kmax) & (my[None, :] <= kmax)
    kphys = np.sqrt((domain.kx ** 2)[:, None] + (domain.ky ** 2)[None, :])
    c = rng.standard_normal(keep.shape) + 1j * rng.standard_normal(keep.shape)
    c *= (1.0 + kphys) ** (-decay) * keep
    full = np.fft.irfft2(c, s=(nx, nyx))
    if domain.is_channel:
        sign = 1.0 if parity is Parity.EVEN else -1.0
        mirror = np.concatenate([full[:, :1], full[:, :0:-1]], axis=1)
        full = 0.5 * (full + sign * mirror)[:, : domain.ny + 1].copy()
        if parity is Parity.ODD:
            full[:, 0] = 0.0
            full[:, -1] = 0.0
    full *= amplitude / max(np.abs(full).max(), 1e-300)
    return ScalarField(domain, full, parity)


def random_vector(domain, rng, generic=False, **kw):
    if domain.is_channel:
        px, py = (Parity.EVEN, Parity.ODD)
    else:
        px = py = Parity.PERIODIC
    u = VectorField(random_field(domain, rng, px, **kw), random_field(domain, rng, py, **kw))
    return u.to_generic() if generic else u


# ---------------------------------------------------------------- snapshots

_MAGIC = b"LMSNAP1\n"


def save_snapshot(path, field, name="", t=0.0):
    """Write a self-describing binary snapshot: magic, JSON header, float64 data."""
    header = dict(field.domain.to_dict())
    header.update(parity=field.parity.value, name=name or field.name, t=float(t),
                  shape=list(field.values.shape), dtype="<f8", order="C")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_snapshot(path):
    """Return ``(field, header)`` from a snapshot file."""
    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise ValueError(f"{path}: not a snapshot file")
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    dom = DomainSpec(Geometry(header["geometry"]), header["nx"], header["ny"],
                     header["lx"], header["ncheb"])
    vals = data.reshape(header["shape"])
    return ScalarField(dom, vals, Parity(header["parity"]), header["name"]), header


def export_csv(path, field):
    X, Y = field.domain.mesh(field.parity)
    table = np.column_stack([X.ravel(), Y.ravel(), field.values.ravel()])
    np.savetxt(Path(path), table, delimiter=",", header="x,y,value", comments="")
