import json

import pytest

from gelsim.cli import main


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_bounds_subcommand(tmp_path, capsys):
    cfg = _write(
        tmp_path / "b.cfg",
        "mode = bounds\nbounds.q = 1.5\nbounds.A = 0.1\nbounds.delta = 0.5\nbounds.k = 16\n",
    )
    code = main(["bounds", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 0
    report = json.loads((tmp_path / "out" / "bounds.json").read_text())
    assert report["sbar"] == 2.0
    assert report["lemma41_bound"] == 2.0
    out = json.loads(capsys.readouterr().out)
    assert out == report


def test_oracle_subcommand(tmp_path, capsys):
    cfg = _write(
        tmp_path / "o.cfg",
        "mode = oracle\nkernel.family = constant\nkernel.c = 1.0\noracle.N = 3\n",
    )
    assert main(["oracle", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["expected_tau_tilde"] == pytest.approx(4.0)
    assert out["states"] == 3


def test_ode_subcommand(tmp_path, capsys):
    cfg = _write(
        tmp_path / "ode.cfg",
        "mode = ode\nkernel.family = constant\nkernel.c = 2.0\n"
        "ode.n_max = 64\node.t_end = 1.0\node.rel_tol = 1e-8\n",
    )
    assert main(["ode", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["final_sol_mass"] == pytest.approx(1.0, abs=1e-6)
    csv = (tmp_path / "out" / "ode.csv").read_text().splitlines()
    assert csv[0].startswith("t,M,g_inf,flux_out,f_1")


def test_simulate_subcommand(tmp_path, capsys):
    cfg = _write(
        tmp_path / "s.cfg",
        "mode = simulate\nkernel.family = product\nkernel.a = 1.0\n"
        "run.n_grid = 64\nrun.seed = 3\n"
        "observe.stopping_times = TauTilde\n"
        "observe.series = true\nobserve.series_stride = 8\n"
        "observe.mass_tail_ks = 2\nevents.log = true\n",
    )
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["final_particle_count"] == 1
    assert out["n_events"] == 63
    assert out["hits"]["TauTilde"]["hit"]
    assert (tmp_path / "out" / "series.csv").exists()
    events = (tmp_path / "out" / "events.csv").read_text().splitlines()
    assert len(events) == 64


def test_ensemble_and_report_subcommands(tmp_path, capsys):
    cfg = _write(
        tmp_path / "e.cfg",
        "mode = ensemble\nkernel.family = constant\nkernel.c = 1.0\n"
        "run.n_grid = 4, 8, 16\nrun.replicas = 5\nrun.seed = 2\nrun.parallelism = 1\n"
        "observe.stopping_times = TauTilde\n"
        "report.bound_kind = Thm17\nbounds.q = 1.5\n",
    )
    out_dir = str(tmp_path / "runs")
    assert main(["ensemble", "--config", cfg, "--out", out_dir]) == 0
    summary = json.loads((tmp_path / "runs" / "summary.json").read_text())
    assert summary["replicas"] == 5
    assert len(summary["rows"]) == 3
    assert "TauTilde" in summary["fits"]
    capsys.readouterr()

    assert main(["report", "--config", cfg, "--out", out_dir]) == 0
    assert (tmp_path / "runs" / "table.csv").exists()


def test_seed_override_changes_results(tmp_path, capsys):
    cfg = _write(
        tmp_path / "e.cfg",
        "mode = ensemble\nkernel.family = constant\nrun.n_grid = 8\n"
        "run.replicas = 3\nrun.seed = 1\nrun.parallelism = 1\n"
        "observe.stopping_times = TauTilde\n",
    )
    assert main(["ensemble", "--config", cfg]) == 0
    first = json.loads(capsys.readouterr().out)
    assert main(["ensemble", "--config", cfg, "--seed", "99"]) == 0
    second = json.loads(capsys.readouterr().out)
    assert first["rows"][0]["mean"] != second["rows"][0]["mean"]
    assert first["seed"] == 1 and second["seed"] == 99


def test_config_error_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.cfg", "mode = ensemble\nkernel.family = wavelet\n")
    assert main(["ensemble", "--config", cfg]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["ensemble", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_runtime_error_exit_code(tmp_path, capsys):
    # oracle refuses N beyond the exact range: runtime failure, exit 3
    cfg = _write(
        tmp_path / "o.cfg",
        "mode = oracle\nkernel.family = constant\noracle.N = 64\n",
    )
    assert main(["oracle", "--config", cfg]) == 3
    assert "error" in capsys.readouterr().err
