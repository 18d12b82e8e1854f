"""Flow maps, compositions with the flow and its inverse, the Lagrangian
solution map and the successive-approximation sequence."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .domain import (Parity, ScalarField, VectorField, advect, dealias, delta, grad,
                     partial, sobolev_norm)
from .elliptic import helmholtz_decompose, inverse_laplacian, project_p
from .eos import sound_speed_squared
from .solvers import (CompressibleState, NumericalFailure, _rk4, cfl_dt, compressible_rhs,
                      gradient_contraction)


class DegenerateFlowMapError(ArithmeticError):
    def __init__(self, index, value):
        super().__init__(f"Jacobian {value:.3e} <= 0 at marker {index}")
        self.index = index


class PullbackError(ArithmeticError):
    def __init__(self, index, residual):
        super().__init__(f"inverse flow solve did not converge at node {index} "
                         f"(residual {residual:.3e})")
        self.index = index
        self.residual = residual


class FixedPointError(ArithmeticError):
    pass


class Direction(enum.Enum):
    WITH_ZETA = "zeta"
    WITH_ZETA_INVERSE = "zeta_inverse"


# ------------------------------------------------------ trigonometric evaluation


class Evaluator:
    """Exact evaluation of band-limited fields at arbitrary points.

    Fields are expanded on the (extended) periodic grid; only modes that are
    actually present are kept, so dealiased data cost about a quarter of a
    full evaluation.
    """

    def __init__(self, fields, derivatives=()):
        d = fields[0].domain
        self.domain = d
        nx, nyx = d.nx, d.ny_ext
        cs = []
        for f in fields:
            cs.append(np.fft.rfft2(f.extended) / (nx * nyx))
        for f, (ax, ay) in derivatives:
            c = np.fft.rfft2(f.extended) / (nx * nyx)
            c = c * ((1j * d.kx[:, None]) ** ax) * ((1j * d.ky[None, :]) ** ay)
            cs.append(c)
        c = np.stack(cs)
        w = np.full(nyx // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        c = c * w[None, None, :]
        mag = np.abs(c).max(axis=0)
        tiny = 1e-15 * max(mag.max(), 1e-300)
        rows = np.nonzero(mag.max(axis=1) > tiny)[0]
        cols = np.nonzero(mag.max(axis=0) > tiny)[0]
        if rows.size == 0:
            rows, cols = np.array([0]), np.array([0])
        self.mx = np.rint(np.fft.fftfreq(nx, d=1.0 / nx)[rows]).astype(int)
        self.my = cols
        self.nfields = c.shape[0]
        # one matrix holding all fields side by side
        sub = c[:, rows][:, :, cols]
        self.coeffs = np.concatenate(list(sub), axis=1)
        self.ncol = cols.size

    @staticmethod
    def _modes(theta, m):
        """``exp(i m theta)`` for integer modes ``m`` by repeated products."""
        top = int(np.abs(m).max())
        base = np.exp(1j * theta)
        pw = np.empty((theta.size, top + 1), dtype=complex)
        pw[:, 0] = 1.0
        if top:
            pw[:, 1:] = base[:, None]
            np.cumprod(pw[:, 1:], axis=1, out=pw[:, 1:])
        out = pw[:, np.abs(m)]
        neg = m < 0
        out[:, neg] = np.conj(out[:, neg])
        return out

    def __call__(self, X, Y):
        d = self.domain
        X = np.asarray(X, dtype=float)
        shape = X.shape
        ex = self._modes(2 * np.pi / d.lx * X.ravel(), self.mx)
        ey = self._modes(2 * np.pi / d.ly_ext * np.asarray(Y, dtype=float).ravel(), self.my)
        a = ex @ self.coeffs
        n = self.ncol
        return [np.real(np.einsum("mj,mj->m", a[:, i * n:(i + 1) * n], ey)).reshape(shape)
                for i in range(self.nfields)]


def evaluate(field, X, Y):
    return Evaluator([field])(X, Y)[0]


# ------------------------------------------------------------------ flow maps


def _labels(domain):
    return domain.mesh(Parity.EVEN if domain.is_channel else Parity.PERIODIC)


def _disp_parities(domain):
    if domain.is_channel:
        return Parity.EVEN, Parity.ODD
    return Parity.PERIODIC, Parity.PERIODIC


@dataclass(frozen=True)
class FlowMap:
    """Markers at the grid nodes, stored through their displacement."""

    disp_x: ScalarField
    disp_y: ScalarField
    velocity: VectorField
    t: float = 0.0

    @classmethod
    def identity(cls, domain, u0=None, t=0.0):
        px, py = _disp_parities(domain)
        z = ScalarField.zeros(domain, px), ScalarField.zeros(domain, py)
        if u0 is None:
            u0 = VectorField.zeros(domain)
        return cls(z[0], z[1], u0, t)

    @classmethod
    def from_displacement(cls, domain, dx, dy, velocity, t):
        px, py = _disp_parities(domain)
        return cls(ScalarField(domain, dx, px), ScalarField(domain, dy, py), velocity, t)

    @property
    def domain(self):
        return self.disp_x.domain

    def positions(self, wrapped=False):
        X, Y = _labels(self.domain)
        px = X + self.disp_x.values
        py = Y + self.disp_y.values
        if wrapped:
            d = self.domain
            px = np.mod(px, d.lx)
            if not d.is_channel:
                py = np.mod(py, d.ly)
        return px, py

    @cached_property
    def jacobian(self):
        a = partial(self.disp_x, 0) + 1.0
        b = partial(self.disp_x, 1)
        c = partial(self.disp_y, 0)
        e = partial(self.disp_y, 1) + 1.0
        return a * e - b * c

    def check(self):
        J = self.jacobian.values
        i = int(np.argmin(J))
        if J.flat[i] <= 0:
            raise DegenerateFlowMapError(np.unravel_index(i, J.shape), J.flat[i])
        return self

    def inverse_points(self, tol=1e-10, max_iter=50):
        """Labels ``x`` with ``x + d(x) = y`` for every grid node ``y``."""
        d = self.domain
        ev = Evaluator([self.disp_x, self.disp_y],
                       derivatives=[(self.disp_x, (1, 0)), (self.disp_x, (0, 1)),
                                    (self.disp_y, (1, 0)), (self.disp_y, (0, 1))])
        Yx, Yy = _labels(d)
        gx, gy = Yx.ravel(), Yy.ravel()
        dx0, dy0 = ev(gx, gy)[:2]
        x, y = gx - dx0, gy - dy0
        for _ in range(max_iter):
            ax, ay, axx, axy, ayx, ayy = ev(x, y)
            rx = x + ax - gx
            ry = y + ay - gy
            res = np.hypot(rx, ry)
            if res.max() <= tol:
                return x.reshape(Yx.shape), y.reshape(Yx.shape)
            a, b, c, e = 1 + axx, axy, ayx, 1 + ayy
            det = a * e - b * c
            x = x - (e * rx - b * ry) / det
            y = y - (-c * rx + a * ry) / det
        worst = int(np.argmax(res))
        raise PullbackError(np.unravel_index(worst, Yx.shape), float(res[worst]))


def _as_list(field):
    return list(field.components) if isinstance(field, VectorField) else [field]


def _rebuild(template, values):
    if isinstance(template, VectorField):
        return VectorField(template.x._new(values[0]), template.y._new(values[1]))
    return template._new(values[0])


def pullback(field, flow, direction=Direction.WITH_ZETA, points=None):
    """Compose ``field`` with the flow map or with its inverse.

    WITH_ZETA evaluates an Eulerian field at the marker positions.
    WITH_ZETA_INVERSE evaluates a Lagrangian field at ``zeta^{-1}`` of every
    grid node.  ``points`` may carry a precomputed inverse.
    """
    direction = Direction(direction)
    comps = _as_list(field)
    if direction is Direction.WITH_ZETA:
        X, Y = flow.positions()
    else:
        X, Y = flow.inverse_points() if points is None else points
    vals = Evaluator(comps)(X, Y)
    return _rebuild(field, vals)


def _marker_velocity(u, DX, DY, labels):
    ev = Evaluator([u.x, u.y])
    return ev(labels[0] + DX, labels[1] + DY)


def flow_advance(flow, velocity, dt):
    """One RK4 step of ``d zeta/dt = u(t, zeta)`` for a velocity provider."""
    d = flow.domain
    lab = _labels(d)
    t = flow.t

    def rhs(y, s):
        return tuple(_marker_velocity(velocity(s), y[0], y[1], lab))

    DX, DY = _rk4((flow.disp_x.values, flow.disp_y.values), t, dt, rhs)
    vx, vy = _marker_velocity(velocity(t + dt), DX, DY, lab)
    px, py = _disp_parities(d)
    vel = VectorField(ScalarField(d, vx, px), ScalarField(d, vy, py))
    return FlowMap.from_displacement(d, DX, DY, vel, t + dt).check()


def density_from_jacobian(flow, f0, transport_initial=True):
    """Log-density reconstructed from the flow map.

    Returns ``f0 o zeta^{-1} + h`` with ``h = -log J o zeta^{-1}``.  With
    ``transport_initial=False`` the first term is ``f0`` itself, which agrees
    only when ``f0`` is constant.
    """
    pts = flow.inverse_points()
    hl = flow.jacobian.map(lambda J: -np.log(J))
    h = pullback(hl, flow, Direction.WITH_ZETA_INVERSE, pts)
    base = pullback(f0, flow, Direction.WITH_ZETA_INVERSE, pts) if transport_initial else f0
    return base + h


def zrz_operators(flow, alpha, points=None):
    """``Z``, ``R`` and ``Z - R`` for the Lagrangian vector field ``alpha``."""
    pts = flow.inverse_points() if points is None else points
    a = pullback(alpha, flow, Direction.WITH_ZETA_INVERSE, pts)
    pa, qa = helmholtz_decompose(a)
    zf = helmholtz_decompose(advect(a, pa))[1]
    rf = helmholtz_decompose(advect(a, qa))[0]
    Z = pullback(zf, flow, Direction.WITH_ZETA)
    R = pullback(rf, flow, Direction.WITH_ZETA)
    return Z, R, Z - R


def eulerian_velocity(flow):
    return pullback(flow.velocity, flow, Direction.WITH_ZETA_INVERSE)


# -------------------------------------------------------------- solution map


@dataclass
class PsiResult:
    flow: FlowMap
    state: CompressibleState
    steps: int
    dt: float


def psi_t(u0, rho0, eos, t, dt=None, safety=0.4, on_step=None):
    """Run the compressible solver and the markers together to time ``t``.

    Returns the Lagrangian pair through ``PsiResult.flow`` (displacement and
    ``zeta_dot``) along with the Eulerian state.  A fixed ``dt`` makes the
    map smooth in the initial data, which the derivative probes rely on.
    """
    d = u0.domain
    f0 = rho0.map(np.log)
    state = CompressibleState(u0, f0, 0.0)
    flow = FlowMap.identity(d, u0)
    if t == 0:
        return PsiResult(flow, state, 0, 0.0)
    if dt is None:
        dt = cfl_dt(state, eos, safety)
    n = max(1, int(np.ceil(t / dt - 1e-9)))
    h = t / n
    lab = _labels(d)

    def rhs(y, s):
        du, df = compressible_rhs(CompressibleState(y[0], y[1], s), eos)
        vx, vy = _marker_velocity(y[0], y[2], y[3], lab)
        return du, df, vx, vy

    y = (u0, f0, flow.disp_x.values, flow.disp_y.values)
    for i in range(n):
        y = _rk4(y, i * h, h, rhs)
        for name, v in zip(("u", "f"), y[:2]):
            vals = _as_list(v)
            if not all(np.all(np.isfinite(c.values)) for c in vals):
                raise NumericalFailure(name, (i + 1) * h)
        if on_step is not None:
            on_step((i + 1) * h, y)
    u, f = y[0], y[1]
    vx, vy = _marker_velocity(u, y[2], y[3], lab)
    px, py = _disp_parities(d)
    vel = VectorField(ScalarField(d, vx, px), ScalarField(d, vy, py))
    flow = FlowMap.from_displacement(d, y[2], y[3], vel, t).check()
    return PsiResult(flow, CompressibleState(u, f, t), n, h)


# ------------------------------------------------------ successive approximations


@dataclass
class SequenceLevel:
    times: list = field(default_factory=list)
    velocity: list = field(default_factory=list)
    f: list = field(default_factory=list)
    grad_g: list = field(default_factory=list)
    flows: list = field(default_factory=list)


@dataclass
class ApproxSequence:
    k: float
    levels: list
    times: list
    dt: float

    def increments(self, s=1):
        """``sup_t ||u_n - u_{n-1}||_s`` for n = 1..n_max."""
        out = []
        for n in range(1, len(self.levels)):
            a, b = self.levels[n].velocity, self.levels[n - 1].velocity
            out.append(max(float(sobolev_norm(x - y, s)) for x, y in zip(a, b)))
        return out

    def flow_increments(self, s=3):
        """``sup_t ||(zeta_n, zeta_n') - (zeta_{n-1}, zeta_{n-1}')||_s``."""
        out = []
        for n in range(1, len(self.levels)):
            a, b = self.levels[n].flows, self.levels[n - 1].flows
            if not a or not b:
                out.append(float("nan"))
                continue
            best = 0.0
            for fa, fb in zip(a, b):
                v = (sobolev_norm(fa.disp_x - fb.disp_x, s) ** 2
                     + sobolev_norm(fa.disp_y - fb.disp_y, s) ** 2
                     + sobolev_norm(fa.velocity - fb.velocity, s) ** 2)
                best = max(best, float(np.sqrt(v)))
            out.append(best)
        return out

    def errors(self, reference, s=1):
        """``sup_t ||u_ref - u_n||_s`` against a list of reference velocities."""
        return [max(float(sobolev_norm(r - x, s)) for r, x in zip(reference, lev.velocity))
                for lev in self.levels]


def approx_sequence(u0k, rho0k, eos, n_max, T, dt=None, safety=0.4, output_times=None,
                    track_markers=False):
    """Successive approximations to the compressible flow.

    Level 0 is the incompressible flow from ``P u0k``.  Level ``n`` solves
    the convected wave equation for ``f_n`` (sound speed from ``f_n``,
    material derivative and forcing from ``u_{n-1}``), sets
    ``grad g_n = -grad lap^{-1} f_n'`` and moves with
    ``u_n = w_n + grad g_n`` where ``w_n = P u_n`` obeys
    ``dw_n/dt = -P(u_n . grad u_n)``.  The last relation is the Eulerian
    form of the flow-map integral equation (its integrand ``Z - R`` is the
    material rate of ``P u_n`` along ``zeta_n``), so all levels advance
    together in one RK4 system.
    """
    if n_max > 3:
        raise ValueError("n_max is limited to 3")
    d = u0k.domain
    f0 = rho0k.map(np.log)
    phi0 = delta(u0k)
    w0 = project_p(u0k)

    def unpack(y):
        ws = [y[0]]
        fs, phis = [None], [None]
        for n in range(1, n_max + 1):
            ws.append(y[3 * n - 2])
            fs.append(y[3 * n - 1])
            phis.append(y[3 * n])
        return ws, fs, phis

    def velocities(ws, phis):
        us, gs = [ws[0]], [None]
        for n in range(1, n_max + 1):
            gg = grad(inverse_laplacian(phis[n])) * -1.0
            gs.append(gg)
            us.append(ws[n] + gg)
        return us, gs

    nlev = n_max + 1

    def rhs(y, s):
        ws, fs, phis = unpack(y)
        us, _ = velocities(ws, phis)
        out = [-project_p(dealias(advect(us[0], us[0])))]
        for n in range(1, nlev):
            b = us[n - 1]
            c2 = sound_speed_squared(eos, fs[n])
            df = phis[n] - dealias(advect(b, fs[n]))
            dphi = (dealias(gradient_contraction(b) - advect(b, phis[n]))
                    - delta(dealias(grad(fs[n]) * c2)))
            dw = -project_p(dealias(advect(us[n], us[n])))
            out.extend([dw, df, dphi])
        if track_markers:
            lab = _labels(d)
            for n in range(nlev):
                DX, DY = y[len(y) - 2 * nlev + 2 * n], y[len(y) - 2 * nlev + 2 * n + 1]
                out.extend(_marker_velocity(us[n], DX, DY, lab))
        return tuple(out)

    y = [w0]
    for n in range(1, nlev):
        y.extend([w0, f0, phi0])
    if track_markers:
        z = np.zeros(d.shape(Parity.EVEN if d.is_channel else Parity.PERIODIC))
        for n in range(nlev):
            y.extend([z, z])
    y = tuple(y)

    if dt is None:
        dt = cfl_dt(CompressibleState(u0k, f0), eos, safety)
    outs = sorted(set([T] if output_times is None else list(output_times) + [T]))
    levels = [SequenceLevel() for _ in range(nlev)]

    def record(y, t):
        ws, fs, phis = unpack(y)
        us, gs = velocities(ws, phis)
        for n in range(nlev):
            L = levels[n]
            L.times.append(t)
            L.velocity.append(us[n])
            L.f.append(fs[n] if n else None)
            L.grad_g.append(gs[n] if n else VectorField.zeros(d))
            if track_markers:
                DX, DY = y[len(y) - 2 * nlev + 2 * n], y[len(y) - 2 * nlev + 2 * n + 1]
                vx, vy = _marker_velocity(us[n], DX, DY, _labels(d))
                px, py = _disp_parities(d)
                vel = VectorField(ScalarField(d, vx, px), ScalarField(d, vy, py))
                L.flows.append(FlowMap.from_displacement(d, DX, DY, vel, t).check())

    t = 0.0
    times = []
    for tout in outs:
        n = int(np.ceil((tout - t) / dt - 1e-9))
        if n > 0:
            h = (tout - t) / n
            for i in range(n):
                y = _rk4(y, t + i * h, h, rhs)
            t = tout
            for v in y[:3 * n_max + 1]:
                if not all(np.all(np.isfinite(c.values)) for c in _as_list(v)):
                    raise NumericalFailure("approximation sequence", t)
        record(y, tout)
        times.append(tout)
    return ApproxSequence(eos.k, levels, times, dt)


def solve_flow_integral_equation(w0, times, grad_g, relax=0.8, tol=1e-8, max_iter=100):
    """Picard iteration for ``zeta' = P u0 + int (Z - R)(zeta, zeta') + grad g o zeta``.

    ``grad_g`` is a list of Eulerian gradient fields at ``times`` (first
    entry at t = 0).  Time integrals use the cumulative trapezoid rule.
    Returns the list of flow maps at ``times`` and the iterate distances.
    """
    d = w0.domain
    nt = len(times)
    tt = np.asarray(times, dtype=float)
    lab = _labels(d)
    px, py = _disp_parities(d)
    shape = lab[0].shape
    zx = np.zeros((nt,) + shape)
    zy = np.zeros((nt,) + shape)
    vx = np.empty((nt,) + shape)
    vy = np.empty((nt,) + shape)
    vx[:] = w0.x.values
    vy[:] = w0.y.values

    def flows(zx, zy, vx, vy):
        return [FlowMap.from_displacement(
            d, zx[i], zy[i], VectorField(ScalarField(d, vx[i], px), ScalarField(d, vy[i], py)),
            tt[i]) for i in range(nt)]

    def cumtrap(a):
        out = np.zeros_like(a)
        h = np.diff(tt)[:, None, None]
        out[1:] = np.cumsum(0.5 * h * (a[1:] + a[:-1]), axis=0)
        return out

    history = []
    rising = 0
    for it in range(max_iter):
        fl = flows(zx, zy, vx, vy)
        zt = np.empty((2, nt) + shape)
        gz = np.empty((2, nt) + shape)
        for i, F in enumerate(fl):
            try:
                F.check()
            except DegenerateFlowMapError as exc:
                raise FixedPointError(f"iterate {it} folds the domain at t = {tt[i]:.4g}; "
                                      f"use a smaller T") from exc
            zz = zrz_operators(F, F.velocity)[2]
            zt[:, i] = zz.x.values, zz.y.values
            g = pullback(grad_g[i], F, Direction.WITH_ZETA)
            gz[:, i] = g.x.values, g.y.values
        nvx = w0.x.values + cumtrap(zt[0]) + gz[0]
        nvy = w0.y.values + cumtrap(zt[1]) + gz[1]
        nzx = cumtrap(nvx)
        nzy = cumtrap(nvy)
        dist = max(np.abs(nzx - zx).max(), np.abs(nzy - zy).max(),
                   np.abs(nvx - vx).max(), np.abs(nvy - vy).max())
        history.append(float(dist))
        zx = zx + relax * (nzx - zx)
        zy = zy + relax * (nzy - zy)
        vx = vx + relax * (nvx - vx)
        vy = vy + relax * (nvy - vy)
        if dist <= tol:
            return flows(zx, zy, vx, vy), history
        if len(history) > 1 and history[-1] > history[-2]:
            rising += 1
            if rising >= 2:
                raise FixedPointError(f"fixed-point iteration is not contracting "
                                      f"(distances {history[-3:]}); use a smaller T")
    raise FixedPointError(f"no convergence in {max_iter} iterations (last {history[-1]:.3e})")
