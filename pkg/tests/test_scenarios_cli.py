import csv
import json

import numpy as np
import pytest

from direscu import cli, scenarios
from direscu.config import ScenarioConfig, load_config, save_config
from direscu.errors import ConfigError, SolverError

TINY = {"solver.horizon": 6, "solver.degree": 1, "n_paths": 40}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def fan_bytes(out):
    return {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}


# ----------------------------------------------------------------- config
def test_config_round_trip(tmp_path):
    cfg = ScenarioConfig().with_(**{"preferences.psi": 0.69, "toggles.slr": False, "solver.horizon": 12})
    save_config(cfg, tmp_path / "c.yaml")
    assert load_config(tmp_path / "c.yaml") == cfg


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError):
        ScenarioConfig().with_(**{"solver.nope": 1})


def test_invalid_solver_settings_rejected():
    with pytest.raises(ConfigError):
        ScenarioConfig().with_(**{"solver.norm": "l2"})


# ----------------------------------------------------------------- toggle fidelity
def test_heat_transport_off_zeroes_transport_terms(tmp_path):
    cfg = ScenarioConfig().with_(**TINY, **{"toggles.heat_transport": False})
    params = scenarios.effective_parameters(cfg)
    assert params["climate"]["xi4"] == 0.0 and params["climate"]["xi5"] == 0.0
    assert scenarios.effective_parameters(ScenarioConfig())["climate"]["xi4"] > 0


@pytest.fixture(scope="module")
def toggled_runs(tmp_path_factory):
    out = {}
    for name, over in {"no_adapt": {"toggles.adaptation": False}, "no_slr": {"toggles.slr": False}}.items():
        cfg = ScenarioConfig().with_(**TINY, **over, **{"climate.tip_threshold": 0.0, "climate.hazard_rate": 0.2})
        out[name] = scenarios.run_scenario(cfg, tmp_path_factory.mktemp(name))
    return out


def test_adaptation_off_pins_adaptation(toggled_runs):
    ens = toggled_runs["no_adapt"].ensembles["planner"]
    assert (ens.tip_year >= 0).any()
    for name in ("adapt_north", "adapt_south"):
        # controls exist for decision years only; the terminal column is NaN
        np.testing.assert_array_equal(ens.series(name)[:, :-1], 0.0)
        assert np.isnan(ens.series(name)[:, -1]).all()


def test_slr_off_pins_sea_level(toggled_runs):
    run = toggled_runs["no_slr"]
    ens = run.ensembles["planner"]
    s0 = run.solutions["planner"].model.initial_state()[8]
    np.testing.assert_array_equal(ens.series("sea_level"), s0)


# ----------------------------------------------------------------- run bundle
def test_rerun_is_byte_identical(tmp_path):
    cfg = ScenarioConfig().with_(**TINY, **{"climate.tip_threshold": 0.0, "climate.hazard_rate": 0.2})
    a = scenarios.run_scenario(cfg, tmp_path / "a", seed=3)
    b = scenarios.run_scenario(cfg, tmp_path / "b", seed=3)
    fa, fb = fan_bytes(tmp_path / "a"), fan_bytes(tmp_path / "b")
    assert fa.keys() == fb.keys() and len(fa) == len(scenarios.FAN_SERIES) + 1
    assert fa == fb
    assert a.manifest["config_hash"] == b.manifest["config_hash"]
    assert a.manifest["files"] == b.manifest["files"]


def test_deterministic_run_has_no_spread(tmp_path):
    cfg = ScenarioConfig().with_(**TINY, **{"toggles.stochastic": False})
    scenarios.run_scenario(cfg, tmp_path)
    for name in ("tax_north", "t_north", "k_south"):
        for row in read_csv(tmp_path / f"fan_planner_{name}.csv"):
            vals = {float(row[c]) for c in ("mean", "q01", "q02", "q05", "min", "max")}
            assert max(vals) - min(vals) <= 1e-12 * max(1.0, max(abs(v) for v in vals))


def test_manifest_contents(tmp_path):
    cfg = ScenarioConfig().with_(**TINY, **{"toggles.stochastic": False})
    res = scenarios.run_scenario(cfg, tmp_path, simulate_paths=False)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config_hash"] == scenarios.config_hash(cfg)
    assert {"numpy", "scipy", "direscu"} <= man["versions"].keys()
    assert man["residuals"]["planner"]["years"] == cfg.solver.horizon  # decision years 0..T-1
    rows = read_csv(tmp_path / "initial_taxes.csv")
    assert float(rows[0]["tax_north"]) == res.taxes["planner"][0]
    assert (tmp_path / "checkpoints" / "planner").is_dir()


def test_checkpoint_reload_reproduces_taxes(tmp_path):
    cfg = ScenarioConfig().with_(**TINY, **{"toggles.stochastic": False})
    res = scenarios.run_scenario(cfg, tmp_path, simulate_paths=False)
    sol = scenarios.load_solution(cfg, tmp_path / "checkpoints" / "planner")
    np.testing.assert_allclose(scenarios.initial_taxes(sol), res.taxes["planner"], rtol=1e-12)


def test_stage_error_names_the_stage(tmp_path, monkeypatch):
    def boom(cfg, log=None):
        raise SolverError("year 3: nodes did not converge")

    monkeypatch.setattr(scenarios, "backward_induction_fbne", boom)
    with pytest.raises(scenarios.StageError) as info:
        scenarios.run_scenario(ScenarioConfig().with_(**TINY), tmp_path, solvers=("fbne",))
    assert info.value.stage == "solve-fbne"
    assert "solve-fbne" in str(info.value)


# ----------------------------------------------------------------- orderings
def _rows(scale_fbne=0.5):
    rows = []
    for solver in scenarios.SOLVERS:
        f = scale_fbne if solver == "fbne" else 1.0
        for mode, psi, gamma in scenarios.sweep_cells():
            risk = 1.3 * gamma / 3.0 if mode == "stochastic" else 1.0
            base = 100.0 * f * (1 + psi) * risk
            rows.append({"solver": solver, "mode": mode, "psi": psi, "gamma": gamma,
                         "tax_north": 1.5 * base, "tax_south": base})
    return rows


def test_orderings_pass_on_consistent_table():
    result = scenarios.orderings(_rows())
    assert result and all(o.passed for o in result)


def test_orderings_catch_game_above_planner():
    result = scenarios.orderings(_rows(scale_fbne=2.0))
    assert any(not o.passed and "planner > fbne" in o.claim for o in result)


def test_sweep_cells():
    cells = scenarios.sweep_cells()
    assert len(cells) == 6
    assert sum(m == "deterministic" for m, _, _ in cells) == 2


# ----------------------------------------------------------------- CLI
def test_cli_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        cli.main(["solve", "nonsense"])
    assert info.value.code == 2


def test_cli_bad_override_exit_code(tmp_path, capsys):
    assert cli.main(["solve", "planner", "--out", str(tmp_path), "--set", "solver.horizon"]) == 1
    assert "KEY=VALUE" in capsys.readouterr().err


def test_cli_calibrate_without_targets_fails(tmp_path):
    assert cli.main(["calibrate", "carbon", "--out", str(tmp_path)]) == 1


def test_cli_calibrate_synthetic(tmp_path, capsys):
    assert cli.main(["calibrate", "carbon", "--synthetic", "--years", "80", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "calibration.json").read_text())
    assert data["at_bounds"] == [] and data["group"] == "carbon"
    assert "max relative residual" in capsys.readouterr().out


def test_cli_solve_and_simulate(tmp_path, capsys):
    args = ["--out", str(tmp_path), "--set", "solver.horizon=5", "--set", "solver.degree=1"]
    assert cli.main(["solve", "planner", *args]) == 0
    assert "initial tax north" in capsys.readouterr().out
    assert cli.main(["simulate", "planner", "--paths", "20", "--seed", "2", *args]) == 0
    assert (tmp_path / "fan_planner_tax_north.csv").exists()


def test_cli_solve_flagged_nodes_exit_code(tmp_path, monkeypatch):
    real = scenarios.residual_stats

    def flagged(sol):
        return {**real(sol), "flagged": 1}

    monkeypatch.setattr(scenarios, "residual_stats", flagged)
    args = ["--out", str(tmp_path), "--set", "solver.horizon=3", "--set", "solver.degree=1"]
    assert cli.main(["solve", "planner", *args]) == 1


def test_cli_report(tmp_path, capsys):
    scenarios.write_rows(_rows(), tmp_path / "sweep.csv")
    assert cli.main(["report", str(tmp_path), "--out", str(tmp_path / "rep")]) == 0
    out = capsys.readouterr().out
    assert "orderings:" in out
    assert (tmp_path / "rep" / "report.json").exists()
