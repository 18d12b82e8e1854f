"""k-sweeps over well-prepared data, slope fitting and the flat config format."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .domain import DomainSpec, Geometry, ScalarField, VectorField, random_vector, sobolev_norm
from .elliptic import project_p
from .eos import Eos, EosFamily
from .lagrange import approx_sequence
from .analysis import cascade
from .solvers import CompressibleState, EulerState, integrate_to


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "domain.geometry": "torus",
    "domain.nx": 32,
    "domain.ny": 32,
    "domain.lx": 2 * math.pi,
    "domain.ncheb": 0,
    "eos.family": "gamma",
    "eos.gamma": 1.4,
    "eos.k": 1000.0,
    "solver.t_final": 0.5,
    "solver.safety": 0.4,
    "solver.dt": 0.0,
    "solver.outputs": 25,
    "sweep.k_list": [1e2, 1e3, 1e4],
    "sweep.n_max": 2,
    "sweep.workers": 1,
    "data.v0": "taylor_green",
    "data.grad_amp": 0.0,
    "data.f_amp": 0.0,
    "data.kmax": 4,
    "seed": 0,
    "output.dir": "out",
}


def _parse_value(key, text, default):
    text = text.strip()
    try:
        if isinstance(default, list):
            return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    return text


def parse_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    cfg = dict(DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        cfg[key] = _parse_value(key, value, DEFAULTS[key])
    validate(cfg)
    return cfg


def load_config(path=None, overrides=()):
    text = ""
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(str(exc)) from exc
    text += "\n" + "\n".join(overrides)
    return parse_config(text)


def validate(cfg):
    if cfg["domain.geometry"] not in ("torus", "channel"):
        raise ConfigError("domain.geometry must be torus or channel")
    for key in ("domain.nx", "domain.ny"):
        n = cfg[key]
        if n < 4 or n & (n - 1):
            raise ConfigError(f"{key} must be a power of two >= 4")
    if cfg["domain.lx"] <= 0:
        raise ConfigError("domain.lx must be positive")
    try:
        EosFamily(cfg["eos.family"])
    except ValueError as exc:
        raise ConfigError(f"unknown eos.family {cfg['eos.family']!r}") from exc
    ks = cfg["sweep.k_list"]
    if not ks or any(not k > 0 for k in ks):
        raise ConfigError("sweep.k_list needs positive entries (inf allowed)")
    if not cfg["eos.k"] > 0:
        raise ConfigError("eos.k must be positive")
    if cfg["solver.t_final"] <= 0 or cfg["solver.outputs"] < 1:
        raise ConfigError("solver.t_final and solver.outputs must be positive")
    if not 0 <= cfg["sweep.n_max"] <= 3:
        raise ConfigError("sweep.n_max must be between 0 and 3")
    if cfg["data.v0"] not in ("taylor_green", "mixed", "random"):
        raise ConfigError("data.v0 must be taylor_green, mixed or random")


def make_domain(cfg):
    if cfg["domain.geometry"] == "torus":
        return DomainSpec.torus(cfg["domain.nx"], cfg["domain.lx"], cfg["domain.ny"])
    return DomainSpec.channel(cfg["domain.nx"], cfg["domain.ny"], cfg["domain.lx"],
                              cfg["domain.ncheb"] or None)


def make_eos(cfg, k=None):
    return Eos(cfg["eos.k"] if k is None else k, cfg["eos.gamma"], cfg["eos.family"])


def _incompressible_data(d, cfg):
    a = 2 * np.pi / d.lx
    if d.geometry is Geometry.TORUS:
        b = 2 * np.pi / d.ly
        v = VectorField.from_function(
            d, lambda X, Y: np.sin(a * X) * np.cos(b * Y),
            lambda X, Y: -(a / b) * np.cos(a * X) * np.sin(b * Y))
        if cfg["data.v0"] == "mixed":
            v = v + VectorField.from_function(d, lambda X, Y: 0.3 * np.sin(2 * b * Y),
                                              lambda X, Y: 0.2 * np.cos(a * X))
    else:
        # stream function sin(a x) sin(pi y): slip walls, x-velocity even in y
        v = VectorField.from_function(
            d, lambda X, Y: np.sin(a * X) * np.cos(np.pi * Y),
            lambda X, Y: -(a / np.pi) * np.cos(a * X) * np.sin(np.pi * Y))
        if cfg["data.v0"] == "mixed":
            v = v + VectorField.from_function(
                d, lambda X, Y: 0.3 * np.cos(2 * np.pi * Y),
                lambda X, Y: 0.0 * X)
    if cfg["data.v0"] == "random":
        rng = np.random.default_rng(cfg["seed"])
        v = project_p(random_vector(d, rng, kmax=cfg["data.kmax"]))
    return v


def _potentials(d):
    a = 2 * np.pi / d.lx
    b = 2 * np.pi / d.ly if d.geometry is Geometry.TORUS else np.pi
    chi = ScalarField.from_function(d, lambda X, Y: np.sin(a * X) * np.cos(b * Y))
    chi2 = ScalarField.from_function(d, lambda X, Y: np.cos(a * X) * np.cos(b * Y))
    return chi, chi2


def initial_data(cfg, k, domain=None):
    """Incompressible data ``v0`` and the matched compressible family at ``k``.

    ``u0k = v0 + grad_amp k^{-1/2} grad chi`` and ``f0k = f_amp chi2 / k``.
    """
    from .domain import grad
    d = domain or make_domain(cfg)
    v0 = _incompressible_data(d, cfg)
    chi, chi2 = _potentials(d)
    if math.isinf(k):
        return v0, None, None
    u0 = v0 + grad(chi) * (cfg["data.grad_amp"] / math.sqrt(k))
    f0 = chi2 * (cfg["data.f_amp"] / k)
    return v0, u0, f0


# ------------------------------------------------------------------ fitting


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float

    def __iter__(self):
        return iter((self.slope, self.intercept, self.stderr))


def fit_slope(points):
    """Least squares line through ``(log k, log value)``."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("slope fits need at least 3 points")
    for i, (k, v) in enumerate(pts):
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"value at index {i} is not positive: {v!r}")
        if not (np.isfinite(k) and k > 0):
            raise ValueError(f"k at index {i} is not positive and finite: {k!r}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    r = stats.linregress(x, y)
    return SlopeFit(float(r.slope), float(r.intercept), float(r.stderr))


# ------------------------------------------------------------------- sweeps


COLUMNS = ["k", "status", "horizon", "u_err_h1", "u_err_h3", "rho_err_l2",
           "f_h4_k", "fdot_h3_sqrtk", "fddot_h2", "fdddot_h1_invsqrtk",
           "inc_1", "inc_2", "inc_3", "seq_err_0", "seq_err_1", "seq_err_2", "seq_err_3"]


@dataclass
class SweepResult:
    k_list: list
    rows: list
    slopes: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def complete(self):
        return all(r["status"] == "ok" for r in self.rows)

    def column(self, name):
        return [r.get(name) for r in self.rows]

    def to_dict(self):
        return {"k_list": self.k_list, "complete": self.complete, "rows": self.rows,
                "slopes": {k: {"slope": s.slope, "intercept": s.intercept, "stderr": s.stderr}
                           for k, s in self.slopes.items()},
                "constants": self.constants, "timing": self.timing}

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join(_fmt(r.get(c)) for c in COLUMNS) + "\n")

    def write_dat(self, path):
        numeric = [c for c in COLUMNS if c != "status"]
        with open(path, "w") as fh:
            fh.write("# " + " ".join(numeric) + "\n")
            for r in self.rows:
                fh.write(" ".join(_fmt(r.get(c), "nan") for c in numeric) + "\n")

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=float)


def _fmt(v, empty=""):
    if v is None:
        return empty
    if isinstance(v, str):
        return v
    return repr(float(v))


def _sup(values):
    return max(values) if values else None


def run_single_k(cfg, k, reference=None, domain=None):
    """One sweep cell; never raises, failures are recorded in ``status``."""
    d = domain or make_domain(cfg)
    row = {c: None for c in COLUMNS}
    row["k"] = k
    T = cfg["solver.t_final"]
    outs = list(np.linspace(0, T, cfg["solver.outputs"] + 1)[1:])
    v0, u0, f0 = initial_data(cfg, k, d)
    if reference is None:
        reference = integrate_to(EulerState(v0), None, T, output_times=outs,
                                 safety=cfg["solver.safety"]).states
    if math.isinf(k):
        row["status"] = "ok"
        row["horizon"] = T
        return row
    eos = make_eos(cfg, k)
    reached = [0.0]
    try:
        dt = cfg["solver.dt"] or None
        run = integrate_to(CompressibleState(u0, f0), eos, T, dt=dt, safety=cfg["solver.safety"],
                           output_times=outs,
                           callback=lambda s: reached.__setitem__(0, s.t))
        states = run.states
        row["horizon"] = T
        row["u_err_h1"] = _sup([float(sobolev_norm(s.u - r.v, 1)) for s, r in zip(states, reference)])
        row["u_err_h3"] = _sup([float(sobolev_norm(s.u - r.v, 3)) for s, r in zip(states, reference)])
        row["rho_err_l2"] = _sup([float(sobolev_norm(s.f.map(np.exp) - 1.0, 0)) for s in states])
        scaled = np.array([cascade(s, eos).scaled() for s in states])
        sup = scaled.max(axis=0)
        row["f_h4_k"], row["fdot_h3_sqrtk"], row["fddot_h2"], row["fdddot_h1_invsqrtk"] = map(float, sup)
        n_max = cfg["sweep.n_max"]
        if n_max > 0:
            seq = approx_sequence(u0, f0.map(np.exp), eos, n_max, T, dt=dt,
                                  safety=cfg["solver.safety"], output_times=outs)
            for n, v in enumerate(seq.increments(1), 1):
                row[f"inc_{n}"] = v
            for n, v in enumerate(seq.errors([s.u for s in states], 1)):
                row[f"seq_err_{n}"] = v
        row["status"] = "ok"
    except Exception as exc:  # sweep isolation: record and continue
        row["status"] = f"failed: {type(exc).__name__}: {exc}".replace(",", ";")
        row["horizon"] = reached[0]
    return row


SLOPE_COLUMNS = ["u_err_h1", "u_err_h3", "rho_err_l2", "inc_1", "inc_2", "inc_3"]


def run_sweep(cfg):
    d = make_domain(cfg)
    T = cfg["solver.t_final"]
    outs = list(np.linspace(0, T, cfg["solver.outputs"] + 1)[1:])
    v0, _, _ = initial_data(cfg, math.inf, d)
    t0 = time.perf_counter()
    reference = integrate_to(EulerState(v0), None, T, output_times=outs,
                             safety=cfg["solver.safety"]).states
    timing = {"incompressible": time.perf_counter() - t0}
    ks = list(cfg["sweep.k_list"])
    workers = cfg["sweep.workers"]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(run_single_k, [cfg] * len(ks), ks))
    else:
        rows = []
        for k in ks:
            t1 = time.perf_counter()
            rows.append(run_single_k(cfg, k, reference, d))
            timing[f"k={k:g}"] = time.perf_counter() - t1
    res = SweepResult(ks, rows, timing=timing)
    good = [r for r in rows if r["status"] == "ok" and not math.isinf(r["k"])]
    for col in SLOPE_COLUMNS:
        pts = [(r["k"], r[col]) for r in good if r.get(col) is not None]
        if len(pts) >= 3 and all(v > 0 for _, v in pts):
            res.slopes[col] = fit_slope(pts)
    res.constants = fitted_constants(good)
    return res


def fitted_constants(rows):
    """Smallest constants making the observed bounds hold across the sweep."""
    out = {}
    specs = {"u_err_h1": 0.5, "rho_err_l2": 1.0, "inc_1": 0.5, "inc_2": 1.0}
    for col, power in specs.items():
        vals = [r[col] * r["k"] ** power for r in rows if r.get(col) is not None]
        if vals:
            out[f"{col}*k^{power:g}"] = max(vals)
    for col in ("f_h4_k", "fdot_h3_sqrtk", "fddot_h2", "fdddot_h1_invsqrtk"):
        vals = [r[col] for r in rows if r.get(col) is not None]
        if vals:
            out[col] = max(vals)
    return out


def incompatible_channel_data(domain, f_amp=1e-3, shear=0.1):
    """Chebyshev-sampled channel data violating all three wall conditions.

    The normal velocity still vanishes at both walls.
    """
    from .domain import Parity
    a = 2 * np.pi / domain.lx
    u = VectorField.from_function(
        domain, lambda X, Y: 0.3 * np.cos(np.pi * Y) * np.sin(a * X) + shear * Y,
        lambda X, Y: 0.2 * np.sin(a * X) * Y * (1 - Y), generic=True)
    f = ScalarField.from_function(
        domain, lambda X, Y: f_amp * (Y ** 2 + 0.3 * np.sin(a * X) * Y ** 3), Parity.GENERIC)
    return u, f
