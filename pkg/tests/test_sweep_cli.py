import json
import math

import numpy as np
import pytest

from lowmach import cli, sweep
from lowmach.sweep import (COLUMNS, ConfigError, fit_slope, initial_data, load_config,
                           parse_config, run_single_k, run_sweep)

TINY = ["domain.nx = 8", "domain.ny = 8", "solver.t_final = 0.05", "solver.outputs = 2",
        "sweep.n_max = 1", "sweep.k_list = 100, 1000, 10000"]


# ------------------------------------------------------------------ fitting


@pytest.mark.parametrize("power", [1.0, 0.5])
def test_fit_slope_exact_power_laws(power):
    fit = fit_slope([(k, 3.0 * k ** -power) for k in (1e2, 1e3, 1e4)])
    assert fit.slope == pytest.approx(-power, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.stderr < 1e-6


def test_fit_slope_recovers_noisy_slope_within_stderr():
    rng = np.random.default_rng(7)
    ks = np.logspace(1, 5, 12)
    vals = 2.0 * ks ** -0.5 * np.exp(0.05 * rng.standard_normal(ks.size))
    slope, _, err = fit_slope(zip(ks, vals))
    assert err > 0
    assert abs(slope + 0.5) <= 3 * err


def test_fit_slope_rejects_bad_input():
    with pytest.raises(ValueError, match="at least 3"):
        fit_slope([(1, 1), (2, 2)])
    with pytest.raises(ValueError, match="index 1"):
        fit_slope([(1, 1.0), (2, 0.0), (3, 1.0)])


# ------------------------------------------------------------------- config


def test_parse_config_types_and_comments():
    cfg = parse_config("domain.nx = 16  # comment\nsweep.k_list = 10; 100, inf\n"
                       "eos.family = linear\n")
    assert cfg["domain.nx"] == 16
    assert cfg["sweep.k_list"][:2] == [10.0, 100.0] and math.isinf(cfg["sweep.k_list"][2])
    assert cfg["eos.family"] == "linear"
    assert cfg["solver.t_final"] == sweep.DEFAULTS["solver.t_final"]


@pytest.mark.parametrize("text", ["nonsense", "domain.nx = 12", "bogus.key = 1",
                                  "domain.nx = eight", "eos.family = stiffened",
                                  "sweep.k_list = 10, -1", "sweep.n_max = 4",
                                  "domain.geometry = sphere"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("domain.nx = 16\neos.k = 50\n")
    cfg = load_config(p, ["eos.k = 70"])
    assert cfg["domain.nx"] == 16 and cfg["eos.k"] == 70.0
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_well_prepared_data_scaling():
    cfg = parse_config("data.grad_amp = 1.0\ndata.f_amp = 1.0\ndomain.nx = 16\ndomain.ny = 16")
    v0, u1, f1 = initial_data(cfg, 100.0)
    _, u2, f2 = initial_data(cfg, 400.0)
    assert (u1 - v0).max_abs() == pytest.approx(2 * (u2 - v0).max_abs())
    assert f1.max_abs() == pytest.approx(4 * f2.max_abs())
    assert initial_data(cfg, math.inf)[1:] == (None, None)


# ------------------------------------------------------------------- sweeps


def test_infinite_k_sentinel_leaves_compressible_columns_empty():
    cfg = load_config(None, TINY)
    row = run_single_k(cfg, math.inf)
    assert row["status"] == "ok"
    assert all(row[c] is None for c in ("u_err_h1", "rho_err_l2", "inc_1"))


def test_sweep_is_deterministic(tmp_path):
    cfg = load_config(None, TINY)
    a, b = run_sweep(cfg), run_sweep(cfg)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    a.write_dat(tmp_path / "a.dat")
    assert (tmp_path / "a.dat").read_text().startswith("# k ")
    assert set(a.slopes) >= {"u_err_h1", "rho_err_l2", "inc_1"}
    for fit in a.slopes.values():
        assert np.isfinite(fit.stderr)


def test_sweep_isolates_failing_cells(monkeypatch):
    cfg = load_config(None, TINY)
    real = sweep.integrate_to

    def flaky(state, eos, *a, **kw):
        if eos is not None and eos.k == 1000.0:
            raise FloatingPointError("injected")
        return real(state, eos, *a, **kw)

    monkeypatch.setattr(sweep, "integrate_to", flaky)
    res = run_sweep(cfg)
    status = res.column("status")
    assert status[0] == "ok" and status[2] == "ok"
    assert status[1].startswith("failed: FloatingPointError")
    assert not res.complete
    assert res.rows[0]["u_err_h1"] is not None and res.rows[2]["u_err_h1"] is not None
    assert res.slopes == {}


# ---------------------------------------------------------------------- cli


def test_cli_fit_exit_codes(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("k,v\n100,0.1\n1000,0.01\n10000,0.001\n")
    assert cli.main(["fit", str(data), "--skip-header", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["slope"] == pytest.approx(-1.0)
    assert cli.main(["fit", str(data), "--skip-header", "1", "--check", "--expect", "-1"]) == 0
    assert cli.main(["fit", str(data), "--skip-header", "1", "--check", "--expect", "-0.5"]) == 4
    assert cli.main(["fit", str(tmp_path / "none.csv")]) == 2


def test_cli_config_errors():
    assert cli.main(["run-incompressible", "domain.nx=7"]) == 2
    assert cli.main(["no-such-command"]) == 2
    assert cli.main(["project-ic", "domain.geometry=torus"]) == 2


def test_cli_numerical_failure_exit_code(tmp_path):
    # past the shock time of 0.1 sin(2 pi x)
    assert cli.main(["burgers-oracle", "--t", "2.0", "--n", "64", "--out", str(tmp_path)]) == 3


def test_cli_burgers_oracle_outputs(tmp_path):
    assert cli.main(["burgers-oracle", "--n", "256", "--out", str(tmp_path), "--check"]) == 0
    data = np.loadtxt(tmp_path / "burgers_oracle.csv", delimiter=",", skiprows=1)
    assert data.shape == (256, 5)
    assert np.abs(data[:, 1] - data[:, 2]).max() < 1e-6


def test_cli_sweep_outputs(tmp_path):
    args = ["sweep-k", "--out", str(tmp_path)] + [t.replace(" ", "") for t in TINY]
    assert cli.main(args) == 0
    header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
    assert header.split(",") == COLUMNS
    summary = json.loads((tmp_path / "sweep.json").read_text())
    assert "slopes" in summary and "constants" in summary
    assert (tmp_path / "sweep.dat").exists()


def test_cli_project_ic_writes_history(tmp_path):
    args = ["project-ic", "--out", str(tmp_path), "--check", "domain.geometry=channel",
            "domain.nx=16", "domain.ny=16", "domain.lx=1", "eos.k=1000"]
    assert cli.main(args) == 0
    hist = json.loads((tmp_path / "compat_history.json").read_text())
    assert hist["history"][-1]["scaled_total"] <= 1e-8 * hist["scale"]
    assert (tmp_path / "projected_f.lmsnap").exists()


def test_cli_short_runs_and_diagnostics(tmp_path):
    common = ["--out", str(tmp_path), "domain.nx=16", "domain.ny=16", "solver.t_final=0.02",
              "solver.outputs=2", "eos.k=100"]
    assert cli.main(["run-incompressible"] + common) == 0
    assert cli.main(["run-compressible"] + common) == 0
    assert (tmp_path / "cascade.csv").exists()
    assert cli.main(["diagnostics", "--ux", str(tmp_path / "compressible_ux.lmsnap"),
                     "--uy", str(tmp_path / "compressible_uy.lmsnap"),
                     "--f", str(tmp_path / "compressible_f.lmsnap")] + common) == 0
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["E1"] >= 100.0 ** 2
    assert cli.main(["approx-seq"] + common + ["sweep.n_max=1"]) == 0
    assert (tmp_path / "approx_seq.csv").exists()


def test_cli_sensitivity_probe(tmp_path):
    args = ["sensitivity", "--out", str(tmp_path), "--t", "0.05", "--lambdas", "0.1,0.05,0.025",
            "domain.nx=16", "domain.ny=16", "eos.k=100"]
    assert cli.main(args) == 0
    probe = json.loads((tmp_path / "probe.json").read_text())
    assert len(probe["lagrangian_h3"]) == 2 and len(probe["lagrangian_h3_ratios"]) == 1
