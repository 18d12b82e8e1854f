"""Compatibility residuals and their projection, the material-derivative
cascade with its energies, the linearized (sensitivity) solver and
finite-difference probes of the Lagrangian solution map."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import (ScalarField, VectorField, Wall, advect, boundary_norm, dealias, delta,
                     div, grad, integrate, normal_derivative, partial, sobolev_norm,
                     velocity_gradient)
from .elliptic import (LMode, LOperator, NeumannData, gradient_potential,
                       helmholtz_decompose, inverse_laplacian, l_solve, neumann_extension)
from .eos import c2_material_chain, sound_speed_squared
from .lagrange import psi_t
from .solvers import (BackgroundUnavailable, CompressibleState, _rk4, cfl_dt,
                      compressible_rhs, gradient_contraction)


class CompatProjectionError(ArithmeticError):
    def __init__(self, ratios):
        super().__init__(f"compatibility projection is not contracting: ratios {ratios}")
        self.ratios = ratios


# ------------------------------------------------------------ compatibility


@dataclass
class CompatReport:
    phi1: float
    phi2: float
    phi3: float
    normal_velocity: float = 0.0
    traces: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    scale: float = 0.0

    def scaled(self, k):
        """Residual sizes made comparable: phi1/k, phi2/k and phi3/k^2."""
        return (self.phi1 / k, self.phi2 / k, self.phi3 / k ** 2)

    def total(self, k):
        return float(sum(self.scaled(k)))


def _wall_pair(values_y0, values_y1):
    return {Wall.Y0: np.asarray(values_y0), Wall.Y1: np.asarray(values_y1)}


def _normal(f):
    return _wall_pair(normal_derivative(f, Wall.Y0), normal_derivative(f, Wall.Y1))


def _at_walls(f):
    return _wall_pair(f.values[:, 0], f.values[:, -1])


def compat_traces(u0, f0, eos):
    """Wall traces of the three residuals on flat walls.

    phi1 = <u.grad u + c2 grad f, nu>
    phi2 = p'' rho f_t d_nu f + c2 d_nu f_t
    phi3 = (c2)_tt d_nu f + 2 (c2)_t d_nu f_t + c2 d_nu f_tt
    with f_t = -u.grad f - div u, u_t = -(u.grad u + c2 grad f),
    f_tt = -u_t.grad f - u.grad f_t - div u_t and
    (c2)_tt = (p''' rho^2 + p'' rho) f_t^2 + p'' rho f_tt.
    """
    if u0.is_generic or f0.is_generic:
        u0, f0 = u0.to_generic(), f0.to_generic()
    rho = f0.map(np.exp)
    r = rho.values
    c2 = sound_speed_squared(eos, f0)
    p2r = f0._new(eos.derivative(r, 2) * r)
    p3r2 = f0._new(eos.derivative(r, 3) * r * r)
    gf = grad(f0)
    A = advect(u0, u0) + gf * c2
    ft = -advect(u0, f0) - div(u0)
    ftt = A.dot(gf) - advect(u0, ft) + div(A)
    c2t = p2r * ft
    c2tt = (p3r2 + p2r) * ft * ft + p2r * ftt
    an = _wall_pair(-A.y.values[:, 0], A.y.values[:, -1])
    nf, nft, nftt = _normal(f0), _normal(ft), _normal(ftt)
    w = {name: _at_walls(q) for name, q in
         (("c2", c2), ("p2r", p2r), ("ft", ft), ("c2t", c2t), ("c2tt", c2tt))}
    phi1 = an
    phi2 = {s: w["p2r"][s] * w["ft"][s] * nf[s] + w["c2"][s] * nft[s] for s in Wall}
    phi3 = {s: w["c2tt"][s] * nf[s] + 2 * w["c2t"][s] * nft[s] + w["c2"][s] * nftt[s]
            for s in Wall}
    un = _wall_pair(-u0.y.values[:, 0], u0.y.values[:, -1])
    return {"phi1": phi1, "phi2": phi2, "phi3": phi3, "normal_velocity": un,
            "c2": w["c2"]}


def compat_scale(u0, f0):
    """Size of the data that residual tolerances are measured against."""
    return float(sobolev_norm(u0, 3) + sobolev_norm(f0, 4))


def compat_residuals(u0, f0, eos):
    """Boundary norms of the residuals, phi_i measured in H^{7/2 - i}."""
    d = u0.domain
    if not d.is_channel:
        return CompatReport(0.0, 0.0, 0.0)
    tr = compat_traces(u0, f0, eos)
    lx = d.lx
    return CompatReport(boundary_norm(tr["phi1"], lx, 2.5), boundary_norm(tr["phi2"], lx, 1.5),
                        boundary_norm(tr["phi3"], lx, 0.5), boundary_norm(tr["normal_velocity"], lx, 0),
                        traces=tr)


def compat_project(u0, f0, eos, max_iter=20, tol=1e-8):
    """Correct ``(u0, f0)`` so that the three residuals vanish.

    The divergence-free part ``w = P u0`` is kept; only ``f`` and the
    gradient potential ``g`` change.  Each sweep applies

        f <- f + G_L(-phi1/c2) + L^{-1} G_L(-phi3/c2)
        g <- g + lap^{-1} G(phi2/c2)

    where ``G`` is the Neumann extension.  Iteration stops when the scaled
    residual total falls below ``tol`` times its initial value.
    """
    d = u0.domain
    k = eos.k
    if not d.is_channel:
        return u0, f0, [CompatReport(0.0, 0.0, 0.0)]
    u = u0.to_generic()
    f = f0.to_generic()
    w, _ = helmholtz_decompose(u)
    g = gradient_potential(u)
    scale = compat_scale(u, f)
    rep = compat_residuals(w + grad(g), f, eos)
    rep.scale = scale
    history = [rep]
    r0 = rep.total(k)
    if r0 <= tol * scale:
        return u, f, history
    prev = r0
    rising = 0
    ratios = []
    for _ in range(max_iter):
        tr = rep.traces
        c2 = sound_speed_squared(eos, f)
        op = LOperator(c2, k)
        a = NeumannData(-tr["phi1"][Wall.Y0] / tr["c2"][Wall.Y0],
                        -tr["phi1"][Wall.Y1] / tr["c2"][Wall.Y1])
        b = NeumannData(-tr["phi3"][Wall.Y0] / tr["c2"][Wall.Y0],
                        -tr["phi3"][Wall.Y1] / tr["c2"][Wall.Y1])
        gb = l_solve(op, None, b, mode=LMode.GL).field
        df = l_solve(op, None, a, mode=LMode.GL).field + l_solve(op, gb).field
        f = f + df
        tr2 = compat_traces(w + grad(g), f, eos)
        h2 = NeumannData(tr2["phi2"][Wall.Y0] / tr2["c2"][Wall.Y0],
                         tr2["phi2"][Wall.Y1] / tr2["c2"][Wall.Y1])
        g = g + inverse_laplacian(neumann_extension(h2, d))
        rep = compat_residuals(w + grad(g), f, eos)
        rep.scale = scale
        cur = rep.total(k)
        ratios.append(cur / prev)
        rep.ratios = list(ratios)
        history.append(rep)
        if cur <= tol * scale:
            break
        rising = rising + 1 if cur >= prev else 0
        if rising >= 2:
            raise CompatProjectionError(ratios)
        prev = cur
    for h in history:
        h.history = [x.total(k) for x in history]
    return w + grad(g), f, history


# ------------------------------------------------------------------ cascade


@dataclass
class CascadeReport:
    f_h4: float
    fdot_h3: float
    fddot_h2: float
    fdddot_h1: float
    E: float
    E1: float
    wall_term: float | None
    k: float
    t: float
    fields: dict = field(default_factory=dict, repr=False)

    def scaled(self):
        """The four norms multiplied by k, sqrt(k), 1 and 1/sqrt(k)."""
        k = self.k
        return (self.f_h4 * k, self.fdot_h3 * np.sqrt(k), self.fddot_h2,
                self.fdddot_h1 / np.sqrt(k))


def l_apply(c2, h):
    return -delta(dealias(grad(h) * c2))


def l1_apply(c2dot, c2, G, h):
    """``(L h)' - L(h')``: the commutator of L with the material derivative."""
    gh = grad(h)
    V = gh * c2
    dV = [[partial(V.x, 0), partial(V.x, 1)], [partial(V.y, 0), partial(V.y, 1)]]
    term1 = -delta(dealias(gh * c2dot))
    term2 = -dealias(sum((G[j][i] * dV[i][j] for i in range(2) for j in range(2)),
                         ScalarField.zeros(h.domain, h.parity)))
    gts = [G[0][0] * gh.x + G[1][0] * gh.y, G[0][1] * gh.x + G[1][1] * gh.y]
    term3 = delta(dealias(VectorField(gts[0], gts[1]) * c2))
    return term1 + term2 + term3


def cascade(state, eos):
    """Four material derivatives of ``f`` from data at one instant."""
    u, f = state.u, state.f
    d = u.domain
    k = eos.k
    c2 = sound_speed_squared(eos, f)
    G = velocity_gradient(u)
    fd = delta(u)
    F = dealias(gradient_contraction(u))
    fdd = l_apply(c2, f) + F
    rho = f.map(np.exp)
    c2dot = dealias(f._new(eos.derivative(rho.values, 2) * rho.values) * fd)
    gf = grad(f) * c2
    udot = [[None, None], [None, None]]
    for i in range(2):
        comp = gf.x if i == 0 else gf.y
        for j in range(2):
            udot[i][j] = -partial(comp, j) - (G[i][0] * G[0][j] + G[i][1] * G[1][j])
    Fdot = dealias(sum((udot[i][j] * G[j][i] for i in range(2) for j in range(2)),
                       ScalarField.zeros(d, f.parity)) * 2.0)
    fddd = l_apply(c2, fd) + l1_apply(c2dot, c2, G, f) + Fdot
    nf, nfd = sobolev_norm(f, 4, "integer"), sobolev_norm(fd, 3, "integer")
    nfdd, nfddd = sobolev_norm(fdd, 2, "integer"), sobolev_norm(fddd, 1, "integer")
    gfd = grad(fddd)
    E = integrate(c2 * gfd.dot(gfd)) + integrate(l_apply(c2, fdd) ** 2)
    E1 = k ** 4 * nf ** 2 + k ** 3 * nfd ** 2 + k ** 2 * nfdd ** 2 + k * nfddd ** 2 + k ** 2
    wall = None
    if d.is_channel:
        ex = partial(fdd, 0)
        dens = c2 * c2 * ex * ex + c2 * fddd * fddd
        wall = 0.5 * d.dx * float(dens.values[:, 0].sum() + dens.values[:, -1].sum())
    return CascadeReport(float(nf), float(nfd), float(nfdd), float(nfddd), float(E),
                         float(E1), wall, k, state.t,
                         {"fdot": fd, "fddot": fdd, "fdddot": fddd, "c2dot": c2dot})


def material_chain_from_state(state, eos):
    rep = cascade(state, eos)
    fl = rep.fields
    return c2_material_chain(eos, state.f, fl["fdot"], fl["fddot"], fl["fdddot"])


def write_cascade_csv(path, reports):
    with open(path, "w") as fh:
        fh.write("t,f_h4,fdot_h3,fddot_h2,fdddot_h1,E,E1\n")
        for r in reports:
            fh.write(f"{r.t!r},{r.f_h4!r},{r.fdot_h3!r},{r.fddot_h2!r},{r.fdddot_h1!r},"
                     f"{r.E!r},{r.E1!r}\n")


# ------------------------------------------------------- linearized problem


@dataclass(frozen=True)
class SensitivityState:
    z: VectorField
    h: ScalarField
    t: float = 0.0

    def constraint_defect(self, base, eos):
        """``||h' + z.grad f - delta z||`` with ``h'`` the material derivative.

        Products are dealiased as in the right-hand side.
        """
        hdot = linearized_rhs(self, base, eos)[1] + dealias(advect(base.u, self.h))
        return float(sobolev_norm(hdot + dealias(advect(self.z, base.f)) - delta(self.z), 0))


class BaseTrajectory:
    """Stored base states with cubic Hermite interpolation in time."""

    def __init__(self, states, eos):
        self.states = list(states)
        self.eos = eos
        self.times = np.array([s.t for s in self.states])
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("base states must have increasing times")
        self.rates = [compressible_rhs(s, eos) for s in self.states]
        self.max_gap = float(np.max(np.diff(self.times))) if len(self.times) > 1 else 0.0

    def __call__(self, t):
        t0, t1 = self.times[0], self.times[-1]
        tol = 1e-12 * max(1.0, abs(t1))
        if t < t0 - tol or t > t1 + tol:
            raise BackgroundUnavailable(f"base trajectory not stored at t = {t:.6g}")
        i = int(np.clip(np.searchsorted(self.times, t) - 1, 0, len(self.times) - 2))
        ta, tb = self.times[i], self.times[i + 1]
        h = tb - ta
        s = (t - ta) / h
        a, b = self.states[i], self.states[i + 1]
        ra, rb = self.rates[i], self.rates[i + 1]
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        u = a.u * h00 + ra[0] * (h10 * h) + b.u * h01 + rb[0] * (h11 * h)
        f = a.f * h00 + ra[1] * (h10 * h) + b.f * h01 + rb[1] * (h11 * h)
        return CompressibleState(u, f, t)


def linearized_rhs(state, base, eos):
    """Tangent of the compressible system about ``base`` in the direction (z, h)."""
    z, h = state.z, state.h
    u, f = base.u, base.f
    rho = np.exp(f.values)
    c2 = sound_speed_squared(eos, f)
    dc2 = f._new(eos.derivative(rho, 2) * rho)
    gf, gh = grad(f), grad(h)
    dz = -dealias(advect(z, u) + advect(u, z) + gf * (dc2 * h) + gh * c2)
    dh = -dealias(advect(z, f) + advect(u, h)) - div(z)
    return dz, dh


def linearized_solve(base, eos, z0, h0, T, dt=None, output_times=None):
    """Integrate the linearized system along a stored base trajectory.

    ``base`` is a ``BaseTrajectory`` or a list of states.  The step defaults
    to the spacing of the stored states.
    """
    if not isinstance(base, BaseTrajectory):
        base = BaseTrajectory(base, eos)
    if T > base.times[-1] + 1e-12:
        raise BackgroundUnavailable(f"base trajectory ends at {base.times[-1]:.6g} < T")
    if dt is None:
        dt = base.max_gap if base.max_gap > 0 else T
    outs = sorted(set([T] if output_times is None else list(output_times) + [T]))
    result = []

    def rhs(y, s):
        return linearized_rhs(SensitivityState(y[0], y[1], s), base(s), eos)

    y = (z0, h0)
    t = float(base.times[0])
    for tout in outs:
        n = int(np.ceil((tout - t) / dt - 1e-9))
        if n > 0:
            hstep = (tout - t) / n
            for i in range(n):
                y = _rk4(y, t + i * hstep, hstep, rhs)
            t = tout
        result.append(SensitivityState(y[0], y[1], tout))
    return result


def record_trajectory(u0, f0, eos, T, dt=None, safety=0.4):
    """Run the compressible solver and keep every step (for linearization)."""
    from .solvers import step
    state = CompressibleState(u0, f0, 0.0)
    if dt is None:
        dt = cfl_dt(state, eos, safety)
    n = max(1, int(np.ceil(T / dt - 1e-9)))
    h = T / n
    states = [state]
    for i in range(n):
        state = step(state, eos, h)
        state = CompressibleState(state.u, state.f, (i + 1) * h)
        states.append(state)
    return BaseTrajectory(states, eos)


# ----------------------------------------------------------------- probes


@dataclass
class ProbeReport:
    lambdas: list
    lagrangian_h3: list
    lagrangian_h2: list
    eulerian_h3: list
    eulerian_h2: list
    dt: float

    def ratios(self, key="lagrangian_h3"):
        seq = getattr(self, key)
        return [a / b if b > 0 else float("inf") for a, b in zip(seq[:-1], seq[1:])]

    def to_dict(self):
        return {"lambdas": [float(x) for x in self.lambdas], "dt": float(self.dt),
                "lagrangian_h3": self.lagrangian_h3, "lagrangian_h2": self.lagrangian_h2,
                "eulerian_h3": self.eulerian_h3, "eulerian_h2": self.eulerian_h2,
                "lagrangian_h3_ratios": self.ratios("lagrangian_h3"),
                "eulerian_h3_ratios": self.ratios("eulerian_h3")}


def _lag_norm(a, b, s):
    return float(np.sqrt(sobolev_norm(a[0] - b[0], s) ** 2 + sobolev_norm(a[1] - b[1], s) ** 2
                         + sobolev_norm(a[2] - b[2], s) ** 2))


def _eul_norm(a, b, s):
    return float(np.sqrt(sobolev_norm(a[0] - b[0], s) ** 2 + sobolev_norm(a[1] - b[1], s) ** 2))


def derivative_probe(u0, f0, z0, h0, eos, t, lambdas, dt=None, safety=0.4):
    """Central differences of the solution map for a list of halving ``lambdas``.

    ``D_lambda`` is formed for the Lagrangian pair (displacement, zeta_dot)
    and for the Eulerian pair (u, f).  The report holds
    ``||D_lambda - D_{lambda/2}||`` in H^3 and H^2 for both pictures.  The
    step is fixed from the base state so the discrete map is smooth in
    ``lambda``.
    """
    lambdas = list(lambdas)
    if dt is None:
        dt = 0.8 * cfl_dt(CompressibleState(u0, f0), eos, safety)
    lag, eul = [], []
    for lam in lambdas:
        plus = psi_t(u0 + z0 * lam, (f0 + h0 * lam).map(np.exp), eos, t, dt=dt)
        minus = psi_t(u0 - z0 * lam, (f0 - h0 * lam).map(np.exp), eos, t, dt=dt)
        s = 0.5 / lam
        lag.append(((plus.flow.disp_x - minus.flow.disp_x) * s,
                    (plus.flow.disp_y - minus.flow.disp_y) * s,
                    (plus.flow.velocity - minus.flow.velocity) * s))
        eul.append(((plus.state.u - minus.state.u) * s, (plus.state.f - minus.state.f) * s))
    rep = ProbeReport(lambdas, [], [], [], [], dt)
    for i in range(len(lambdas) - 1):
        rep.lagrangian_h3.append(_lag_norm(lag[i], lag[i + 1], 3))
        rep.lagrangian_h2.append(_lag_norm(lag[i], lag[i + 1], 2))
        rep.eulerian_h3.append(_eul_norm(eul[i], eul[i + 1], 3))
        rep.eulerian_h2.append(_eul_norm(eul[i], eul[i + 1], 2))
    return rep
