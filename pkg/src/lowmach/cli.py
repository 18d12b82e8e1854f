"""Command line entry point: ``lowmach <subcommand> [--config FILE] [key=value ...]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance threshold missed in ``--check`` mode.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .domain import (DomainSpec, ScalarField, VectorField, load_snapshot,
                     save_snapshot)
from .elliptic import SeriesDivergedError
from .lagrange import DegenerateFlowMapError, approx_sequence
from .oracle1d import (CflViolation, HorizonExceeded, Profile1D, burgers_exact,
                       burgers_numeric, burgers_sensitivity_exact, sensitivity_fd_check,
                       write_oracle_csv)
from .solvers import (CompressibleState, EulerState, NumericalFailure, integrate_to,
                      write_timeseries)
from .sweep import (ConfigError, fit_slope, incompatible_channel_data,
                    initial_data, load_config, make_domain, make_eos, run_sweep)
from . import analysis

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4

NUMERIC_ERRORS = (NumericalFailure, SeriesDivergedError, analysis.CompatProjectionError,
                  DegenerateFlowMapError, HorizonExceeded, CflViolation, FloatingPointError)

# acceptance windows used by --check
SWEEP_WINDOWS = {"u_err_h1": (-0.5, 0.15), "rho_err_l2": (-1.0, 0.15),
                 "inc_1": (-0.5, 0.2), "inc_2": (-1.0, 0.25)}


class CheckFailed(Exception):
    pass


def _outdir(cfg, args):
    d = Path(args.out or cfg["output.dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _save_velocity(outdir, stem, u, t):
    save_snapshot(outdir / f"{stem}_ux.lmsnap", u.x, f"{stem}_ux", t)
    save_snapshot(outdir / f"{stem}_uy.lmsnap", u.y, f"{stem}_uy", t)


def _load_state(args):
    try:
        ux, hx = load_snapshot(args.ux)
        uy, _ = load_snapshot(args.uy)
        f, _ = load_snapshot(args.f)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read snapshots: {exc}") from exc
    return CompressibleState(VectorField(ux, uy), f, hx.get("t", 0.0))


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=float)


def _check(ok, message):
    print(("PASS " if ok else "FAIL ") + message)
    return ok


# ------------------------------------------------------------- subcommands


def cmd_project_ic(cfg, args):
    d = make_domain(cfg)
    if not d.is_channel:
        raise ConfigError("project-ic needs domain.geometry = channel")
    if not cfg["domain.ncheb"]:
        # third wall derivatives lose accuracy like ncheb^6; 20 intervals resolve
        # the smooth test data while keeping the residual floor below 1e-9
        d = DomainSpec.channel(d.nx, d.ny, d.lx, 20)
    eos = make_eos(cfg)
    u0, f0 = incompatible_channel_data(d)
    u, f, hist = analysis.compat_project(u0, f0, eos, max_iter=args.max_iter)
    out = _outdir(cfg, args)
    k = eos.k
    summary = {"k": k, "history": [{"phi1": h.phi1, "phi2": h.phi2, "phi3": h.phi3,
                                    "scaled_total": h.total(k)} for h in hist],
               "ratios": hist[-1].ratios, "scale": hist[0].scale}
    _dump(out / "compat_history.json", summary)
    _save_velocity(out, "projected", u, 0.0)
    save_snapshot(out / "projected_f.lmsnap", f, "projected_f", 0.0)
    rel = hist[-1].total(k) / hist[0].scale
    print(f"compatibility residual {rel:.3e} of the data scale after {len(hist) - 1} sweeps")
    if args.check and not _check(rel <= 1e-8, f"projected residual {rel:.3e} <= 1e-8 * scale"):
        raise CheckFailed
    return EXIT_OK


def cmd_run_incompressible(cfg, args):
    v0, _, _ = initial_data(cfg, math.inf)
    T = cfg["solver.t_final"]
    outs = list(np.linspace(0, T, cfg["solver.outputs"] + 1)[1:])
    run = integrate_to(EulerState(v0), None, T, dt=cfg["solver.dt"] or None,
                       safety=cfg["solver.safety"], output_times=outs)
    out = _outdir(cfg, args)
    write_timeseries(out / "incompressible_timeseries.csv", run.samples)
    _save_velocity(out, "incompressible", run.final.v, T)
    print(f"incompressible run: {run.steps} steps, dt = {run.dt:.4g}")
    return EXIT_OK


def cmd_run_compressible(cfg, args):
    eos = make_eos(cfg)
    _, u0, f0 = initial_data(cfg, eos.k)
    T = cfg["solver.t_final"]
    outs = list(np.linspace(0, T, cfg["solver.outputs"] + 1)[1:])
    run = integrate_to(CompressibleState(u0, f0), eos, T, dt=cfg["solver.dt"] or None,
                       safety=cfg["solver.safety"], output_times=outs)
    out = _outdir(cfg, args)
    write_timeseries(out / "compressible_timeseries.csv", run.samples)
    analysis.write_cascade_csv(out / "cascade.csv", [analysis.cascade(s, eos) for s in run.states])
    _save_velocity(out, "compressible", run.final.u, T)
    save_snapshot(out / "compressible_f.lmsnap", run.final.f, "compressible_f", T)
    print(f"compressible run at k = {eos.k:g}: {run.steps} steps, dt = {run.dt:.4g}")
    return EXIT_OK


def cmd_sweep_k(cfg, args):
    res = run_sweep(cfg)
    out = _outdir(cfg, args)
    res.write_csv(out / "sweep.csv")
    res.write_dat(out / "sweep.dat")
    res.write_json(out / "sweep.json")
    for name, fit in res.slopes.items():
        print(f"slope {name}: {fit.slope:+.3f} +- {fit.stderr:.3f}")
    if not res.complete:
        print("sweep incomplete: " + "; ".join(
            f"k={r['k']:g} {r['status']}" for r in res.rows if r["status"] != "ok"))
    if args.check:
        ok = res.complete
        for name, (target, tol) in SWEEP_WINDOWS.items():
            fit = res.slopes.get(name)
            good = fit is not None and abs(fit.slope - target) <= tol
            ok &= _check(good, f"slope {name} within {target} +- {tol}")
        if not ok:
            raise CheckFailed
    return EXIT_OK


def cmd_approx_seq(cfg, args):
    eos = make_eos(cfg)
    _, u0, f0 = initial_data(cfg, eos.k)
    T = cfg["solver.t_final"]
    outs = list(np.linspace(0, T, cfg["solver.outputs"] + 1)[1:])
    n_max = cfg["sweep.n_max"] or 1
    seq = approx_sequence(u0, f0.map(np.exp), eos, n_max, T, dt=cfg["solver.dt"] or None,
                          safety=cfg["solver.safety"], output_times=outs)
    exact = integrate_to(CompressibleState(u0, f0), eos, T, dt=seq.dt, output_times=outs)
    errs = seq.errors([s.u for s in exact.states], 1)
    out = _outdir(cfg, args)
    with open(out / "approx_seq.csv", "w") as fh:
        fh.write("n,increment_h1,error_h1\n")
        incs = [None] + seq.increments(1)
        for n in range(n_max + 1):
            inc = "" if incs[n] is None else repr(incs[n])
            fh.write(f"{n},{inc},{errs[n]!r}\n")
    print("errors vs compressible flow: " + ", ".join(f"{e:.3e}" for e in errs))
    if args.check:
        ok = _check(all(a > b for a, b in zip(errs, errs[1:])), "errors decrease with n")
        if not ok:
            raise CheckFailed
    return EXIT_OK


def cmd_sensitivity(cfg, args):
    d = make_domain(cfg)
    if d.is_channel:
        raise ConfigError("sensitivity probes run on the torus")
    eos = make_eos(cfg)
    _, u0, f0 = initial_data(cfg, eos.k)
    a = 2 * np.pi / d.lx
    z0 = VectorField.from_function(d, lambda X, Y: np.cos(2 * a * Y), lambda X, Y: np.sin(a * X))
    h0 = ScalarField.from_function(d, lambda X, Y: np.sin(a * (X - Y)) / eos.k)
    lams = [float(x) for x in args.lambdas.split(",")]
    rep = analysis.derivative_probe(u0, f0, z0, h0, eos, args.t, lams)
    out = _outdir(cfg, args)
    _dump(out / "probe.json", rep.to_dict())
    ratios = rep.ratios("lagrangian_h3")
    print("lagrangian H3 ratios: " + ", ".join(f"{r:.2f}" for r in ratios))
    print("eulerian H3 ratios:   " + ", ".join(f"{r:.2f}" for r in rep.ratios("eulerian_h3")))
    if args.check and not _check(all(r >= 3 for r in ratios), "lagrangian ratios >= 3"):
        raise CheckFailed
    return EXIT_OK


def cmd_burgers(cfg, args):
    n, t, amp = args.n, args.t, args.amplitude
    tau = 2 * np.pi
    u0 = Profile1D.from_function(lambda x: amp * np.sin(tau * x), n,
                                 lambda x: amp * tau * np.cos(tau * x))
    z0 = Profile1D.from_function(lambda x: np.cos(tau * x), n, lambda x: -tau * np.sin(tau * x))
    ue = burgers_exact(u0, t)
    un = burgers_numeric(u0, t)
    ze = burgers_sensitivity_exact(u0, z0, t)
    lam = 1e-4
    zfd = (burgers_exact(u0.scaled_sum(z0, lam), t).values
           - burgers_exact(u0.scaled_sum(z0, -lam), t).values) / (2 * lam)
    out = _outdir(cfg, args)
    write_oracle_csv(out / "burgers_oracle.csv", u0.x, ue.values, un.values, ze.values, zfd)
    err = float(np.max(np.abs(un.values - ue.values)))
    fd = sensitivity_fd_check(u0, z0, t)
    print(f"max |numeric - exact| = {err:.3e}; difference-quotient order {fd.order:.3f}")
    if args.check:
        ok = _check(err <= 1e-6, "numeric vs exact <= 1e-6")
        ok &= _check(fd.order >= 1.9, "sensitivity order >= 1.9")
        if not ok:
            raise CheckFailed
    return EXIT_OK


def cmd_diagnostics(cfg, args):
    eos = make_eos(cfg)
    if args.ux:
        state = _load_state(args)
    else:
        _, u0, f0 = initial_data(cfg, eos.k)
        state = CompressibleState(u0, f0)
    rep = analysis.cascade(state, eos)
    comp = analysis.compat_residuals(state.u, state.f, eos)
    out = _outdir(cfg, args)
    analysis.write_cascade_csv(out / "diagnostics_cascade.csv", [rep])
    _dump(out / "diagnostics.json", {
        "k": eos.k, "t": rep.t, "f_h4": rep.f_h4, "fdot_h3": rep.fdot_h3,
        "fddot_h2": rep.fddot_h2, "fdddot_h1": rep.fdddot_h1, "E": rep.E, "E1": rep.E1,
        "wall_term": rep.wall_term, "scaled": list(rep.scaled()),
        "compat": {"phi1": comp.phi1, "phi2": comp.phi2, "phi3": comp.phi3}})
    print(f"E = {rep.E:.4g}, E1 = {rep.E1:.4g}; scaled norms "
          + ", ".join(f"{v:.3g}" for v in rep.scaled()))
    return EXIT_OK


def cmd_fit(cfg, args):
    try:
        data = np.loadtxt(args.input, delimiter=",", ndmin=2, skiprows=args.skip_header)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {args.input}: {exc}") from exc
    if data.shape[1] < 2:
        raise ConfigError("fit input needs two columns: k, value")
    try:
        fit = fit_slope(list(zip(data[:, 0], data[:, 1])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps({"slope": fit.slope, "intercept": fit.intercept, "stderr": fit.stderr}))
    if args.check and args.expect is not None:
        if not _check(abs(fit.slope - args.expect) <= args.tol,
                      f"slope {fit.slope:.3f} within {args.expect} +- {args.tol}"):
            raise CheckFailed
    return EXIT_OK


COMMANDS = {
    "project-ic": cmd_project_ic,
    "run-incompressible": cmd_run_incompressible,
    "run-compressible": cmd_run_compressible,
    "sweep-k": cmd_sweep_k,
    "approx-seq": cmd_approx_seq,
    "sensitivity": cmd_sensitivity,
    "burgers-oracle": cmd_burgers,
    "diagnostics": cmd_diagnostics,
    "fit": cmd_fit,
}


def build_parser():
    p = argparse.ArgumentParser(prog="lowmach", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key = value configuration file")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        s.add_argument("--check", action="store_true",
                       help="exit with status 4 when an acceptance threshold is missed")
        s.add_argument("overrides", nargs="*", help="extra key=value settings")
        if name == "project-ic":
            s.add_argument("--max-iter", type=int, default=20)
        if name == "sensitivity":
            s.add_argument("--t", type=float, default=0.3)
            s.add_argument("--lambdas", default="0.1,0.05,0.025,0.0125")
        if name == "burgers-oracle":
            s.add_argument("--n", type=int, default=2048)
            s.add_argument("--t", type=float, default=0.5)
            s.add_argument("--amplitude", type=float, default=0.1)
        if name == "diagnostics":
            s.add_argument("--ux")
            s.add_argument("--uy")
            s.add_argument("--f")
        if name == "fit":
            s.add_argument("input", help="CSV with columns k,value")
            s.add_argument("--skip-header", type=int, default=0)
            s.add_argument("--expect", type=float)
            s.add_argument("--tol", type=float, default=0.15)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args.overrides)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckFailed:
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
