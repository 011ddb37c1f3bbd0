"""Tests for the experiment driver, CSV round trips and the CLI."""

import math
import warnings

import numpy as np
import pytest

from leapwave.cli import _read_config_file, main
from leapwave.damped_norms import SeparableSolution, error_measures
from leapwave.fem1d import LagrangeSpace, UniformMesh1D, load_vector
from leapwave.harness import (
    CSV_COLUMNS,
    RunConfig,
    RunRecord,
    cfl_alpha,
    derived_tau,
    emit_csv,
    rate_table,
    read_csv,
    run_experiment,
    sweep,
)
from leapwave.reconstruct import reconstruct_L, reconstruct_R
from leapwave.timestepping import TimeGrid, run_leapfrog

# rho * t_star is kept large in every configuration here so that constructing
# RunConfig stays silent; the warning path gets its own test.
QUICK = dict(rho=0.05, t_star=250.0)


def _almost(a, b, rel=1e-9):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(benchmark="gaussian", **QUICK)
    with pytest.raises(ValueError):
        RunConfig(degree=4, **QUICK)
    with pytest.raises(ValueError):
        RunConfig(n_cells=48, **QUICK)
    with pytest.raises(ValueError):
        RunConfig(n_cells=1024, **QUICK)
    with pytest.raises(ValueError):
        RunConfig(cfl_ratio=1.0, **QUICK)
    with pytest.raises(ValueError):
        RunConfig(cfl_ratio=0.0, **QUICK)
    with pytest.raises(ValueError):
        RunConfig(rho=0.0, t_star=250.0)
    with pytest.raises(ValueError):
        RunConfig(rho=-0.1, t_star=250.0)
    with pytest.raises(ValueError):
        RunConfig(time_mode="fixed", **QUICK)
    with pytest.raises(ValueError):
        RunConfig(rho=0.05, t_star=0.0)


def test_config_warns_on_fat_damping_tail():
    with pytest.warns(UserWarning, match="5e-6"):
        RunConfig(rho=0.02, t_star=100.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        RunConfig(rho=0.02, t_star=640.0)


def test_derived_tau_modes():
    a1 = cfl_alpha(1)
    assert 0.0 < a1 < 1.0
    assert cfl_alpha(1) == a1  # cached

    cfl = [
        derived_tau(RunConfig(degree=1, n_cells=n, time_mode="cfl", **QUICK))
        for n in (2, 4, 8)
    ]
    assert _almost(cfl[0], 0.9 * a1 * 10.0, rel=1e-14)
    assert _almost(cfl[0] / cfl[1], 2.0, rel=1e-14)

    ladder = (2, 4, 8, 16, 32, 64)
    scaled = [
        derived_tau(RunConfig(degree=1, n_cells=n, time_mode="scaled", **QUICK))
        for n in ladder
    ]
    # anchored at the coarsest admissible mesh, then tau^2 ~ h^3
    assert scaled[0] == cfl[0]
    consts = [t**2 / (20.0 / n) ** 3 for t, n in zip(scaled, ladder)]
    assert max(consts) - min(consts) <= 1e-12 * max(consts)


def test_smoke_run_fills_record():
    config = RunConfig(degree=1, n_cells=4, **QUICK)
    rec = run_experiment(config)
    assert rec.status == "ok"
    assert rec.h == 5.0
    assert rec.dofs == 3
    assert rec.steps == math.ceil(config.t_star / rec.tau - 1e-9)
    for name in ("e_U", "e_u", "e_w", "ex_w", "et_w", "E_rho", "R", "M", "Lambda"):
        value = getattr(rec, name)
        assert math.isfinite(value) and value > 0.0
    assert math.isclose(rec.Lambda**2, rec.R**2 + 20.0 * rec.M**2, rel_tol=1e-12)
    assert _almost(rec.effectivity, rec.Lambda / rec.E_rho, rel=1e-12)
    assert rec.wall_time > 0.0


def test_minimal_mesh_single_dof_runs():
    rec = run_experiment(RunConfig(degree=1, n_cells=2, **QUICK))
    assert rec.status == "ok"
    assert rec.dofs == 1
    assert math.isfinite(rec.effectivity)


def test_propagating_run_uses_stored_states():
    rec = run_experiment(RunConfig(benchmark="propagating", degree=1, n_cells=8, **QUICK))
    assert rec.status == "ok"
    assert 0.0 < rec.e_w < 10.0
    assert rec.Lambda > 0.0 and math.isfinite(rec.effectivity)


def test_without_estimator_masks_columns():
    rec = run_experiment(RunConfig(degree=1, n_cells=4, with_estimator=False, **QUICK))
    assert rec.status == "ok"
    assert rec.e_w > 0.0
    for name in ("R", "M", "eta_f", "Lambda", "effectivity"):
        assert math.isnan(getattr(rec, name))


class _SilentCase:
    """Separable case with zero forcing and zero exact solution."""

    def forcing_time_profile(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def forcing_space_profile(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def f(self, t, x):
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape)

    def separable_solution(self):
        def time_values(t):
            z = np.zeros_like(np.asarray(t, dtype=float))
            return z, z

        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return SeparableSolution(time_values, zero, zero)


def test_zero_case_gives_zero_record():
    rec = run_experiment(RunConfig(degree=2, n_cells=4, **QUICK), case=_SilentCase())
    assert rec.status == "ok"
    for name in ("e_U", "e_u", "e_w", "ex_w", "et_w", "E_rho", "R", "M", "eta_f", "Lambda"):
        assert getattr(rec, name) == 0.0
    assert math.isnan(rec.effectivity)


def test_rho_tau_guard():
    # 2 cells at degree 1 leave tau above 5, so rho = 0.9 breaks rho*tau <= 1
    config = RunConfig(degree=1, n_cells=2, rho=0.9, t_star=250.0)
    with pytest.raises(ValueError, match="rho"):
        run_experiment(config)


def test_unstable_step_reports_status(monkeypatch):
    import leapwave.harness as harness

    monkeypatch.setattr(harness, "cfl_alpha", lambda degree, probe_horizon=20000: 2.0)
    rec = run_experiment(RunConfig(degree=1, n_cells=4, **QUICK))
    assert rec.status.startswith("cfl:")
    assert math.isnan(rec.e_w) and math.isnan(rec.Lambda)
    assert rec.dofs == 3 and math.isfinite(rec.wall_time)


def test_streaming_matches_stored_path():
    from leapwave.benchmarks import make_standing

    case = make_standing()
    config = RunConfig(degree=2, n_cells=8, rho=0.2, t_star=80.0)
    rec = run_experiment(config)

    space = LagrangeSpace(UniformMesh1D(-10.0, 10.0, 8), 2)
    grid = TimeGrid(rec.tau, rec.steps)
    grid_run = TimeGrid(rec.tau, rec.steps + 2)
    amps = np.asarray(case.forcing_time_profile(grid_run.times[:-1]))
    amps[0] = 0.0
    shape = load_vector(space, case.forcing_space_profile)
    seq = run_leapfrog(space, grid_run, (amps, shape))
    stored = error_measures(
        seq, reconstruct_R(seq, grid), reconstruct_L(seq, grid), case, 0.2, grid
    )
    for name in ("e_U", "e_u", "e_w", "ex_U", "ex_u", "ex_w", "et_U", "et_u", "et_w"):
        assert _almost(getattr(rec, name), getattr(stored, name), rel=1e-8)


def test_sweep_runs_ladder_and_emits_csv(tmp_path):
    out = tmp_path / "ladder.csv"
    base = RunConfig(degree=1, out=str(out), **QUICK)
    records, rates = sweep(base, (4, 8, 16))
    assert [rec.h for rec in records] == [5.0, 2.5, 1.25]
    assert records[0].e_w > records[1].e_w > records[2].e_w
    assert all(len(seq) == 2 for seq in rates.values())
    assert 1.0 < rates["e_w"][-1] < 3.0

    back = read_csv(out)
    assert len(back) == 3
    for rec, loaded in zip(records, back):
        for name in CSV_COLUMNS:
            a, b = getattr(rec, name), getattr(loaded, name)
            assert a == b or (math.isnan(a) and math.isnan(b))
        assert loaded.status == "ok"

    with pytest.raises(ValueError, match="ascending"):
        sweep(base, (8, 4))


def test_read_csv_rejects_malformed_files(tmp_path):
    rec = run_experiment(RunConfig(degree=1, n_cells=4, **QUICK))
    good = tmp_path / "good.csv"
    emit_csv([rec], good)
    lines = good.read_text().splitlines()

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="header"):
        read_csv(empty)

    bad_header = tmp_path / "hdr.csv"
    bad_header.write_text("\n".join(["h,tau,oops"] + lines[1:]) + "\n")
    with pytest.raises(ValueError, match="header"):
        read_csv(bad_header)

    short_row = tmp_path / "short.csv"
    short_row.write_text("\n".join([lines[0], lines[1].rsplit(",", 1)[0]]) + "\n")
    with pytest.raises(ValueError, match="line 2"):
        read_csv(short_row)

    parts = lines[1].split(",")
    parts[4] = "not-a-number"
    bad_value = tmp_path / "value.csv"
    bad_value.write_text("\n".join([lines[0], ",".join(parts)]) + "\n")
    with pytest.raises(ValueError, match="line 2.*e_U"):
        read_csv(bad_value)

    parts = lines[1].split(",")
    parts[CSV_COLUMNS.index("Lambda")] = format(rec.Lambda * 1.5, ".16e")
    broken = tmp_path / "identity.csv"
    broken.write_text("\n".join([lines[0], ",".join(parts)]) + "\n")
    with pytest.raises(ValueError, match="Lambda"):
        read_csv(broken)

    header_only = tmp_path / "none.csv"
    header_only.write_text(lines[0] + "\n")
    assert read_csv(header_only) == []


def _record(**overrides):
    values = {name: 1.0 for name in CSV_COLUMNS}
    values.update(dofs=10, steps=100, R=1.0, M=0.0, eta_f=0.0, Lambda=1.0)
    values.update(overrides)
    return RunRecord(**values)


def test_rate_table_handles_missing_values():
    nan = float("nan")
    records = [
        _record(e_w=4.0e-2),
        _record(e_w=1.0e-2, R=nan, M=nan, Lambda=nan),
        _record(e_w=0.0),
    ]
    rates = rate_table(records)
    assert _almost(rates["e_w"][0], 2.0, rel=1e-12)
    assert math.isnan(rates["e_w"][1])  # zero value has no order
    assert all(math.isnan(v) for v in rates["R"])


def test_cli_single_run_with_output(tmp_path, capsys):
    out = tmp_path / "run.csv"
    argv = [
        "run", "--benchmark", "standing", "--degree", "1", "--cells", "4",
        "--rho", "0.05", "--tstar", "250", "--out", str(out),
    ]
    assert main(argv) == 0
    text = capsys.readouterr().out
    assert "E_rho" in text and "Lambda" in text
    assert len(read_csv(out)) == 1


def test_cli_inserts_run_for_bare_flags(capsys):
    assert main(["--degree", "1", "--cells", "4", "--rho", "0.05", "--tstar", "250"]) == 0
    assert "E_rho" in capsys.readouterr().out


def test_cli_config_file_with_overrides(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "degree = 2\n"
        "cells = 8   # flag below wins\n"
        "rho = 0.05\n"
        "tstar = 250\n"
        "cfl-ratio = 0.8\n"
    )
    assert main(["run", "--config", str(cfg), "--cells", "4"]) == 0
    assert " 5.00000e+00" in capsys.readouterr().out  # h of the 4-cell mesh

    bad = tmp_path / "bad.cfg"
    bad.write_text("cells = 8\nwavelength = 3\n")
    with pytest.raises(ValueError, match="line 2"):
        _read_config_file(str(bad))
    noeq = tmp_path / "noeq.cfg"
    noeq.write_text("degree 2\n")
    with pytest.raises(ValueError, match="key=value"):
        _read_config_file(str(noeq))


def test_cli_sweep_prints_rate_table(capsys):
    argv = ["run", "--degree", "1", "--rho", "0.05", "--tstar", "250", "--sweep", "4,8"]
    assert main(argv) == 0
    text = capsys.readouterr().out
    assert text.count("5.00000e+00") >= 1 and "2.50000e+00" in text
    assert "order" in text


def test_cli_rates_subcommand(tmp_path, capsys):
    path = tmp_path / "two.csv"
    emit_csv([_record(e_w=4.0e-2), _record(e_w=1.0e-2)], path)
    assert main(["rates", str(path)]) == 0
    text = capsys.readouterr().out
    assert "e_w" in text and "2.000" in text

    single = tmp_path / "one.csv"
    emit_csv([_record()], single)
    assert main(["rates", str(single)]) == 0
    assert "need at least two runs" in capsys.readouterr().out


def test_cli_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    text = capsys.readouterr().out
    assert "selftest: ok" in text and "FAIL" not in text


def test_cli_rejects_bad_degree():
    with pytest.raises(SystemExit):
        main(["run", "--degree", "5"])
