import json

import numpy as np
import pytest
import yaml

from riskplan import cli
from riskplan.gp import GaussianBelief, GpModel
from riskplan.risk import cvar
from riskplan.runner import export_field, read_grid_csv, run, write_grid_csv
from riskplan.scenario import ConfigError, Scenario, bundled_scenarios, load_scenario
from riskplan.trace import read_trace


@pytest.fixture(scope="module")
def fig2_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig2")
    trace = run(load_scenario("fig2"), deterministic=True, out_dir=out)
    return out, trace


def test_bundled_names():
    assert {"fig2", "fig3", "trivial"} <= set(bundled_scenarios())


@pytest.mark.parametrize("name", ["fig2", "fig3", "trivial"])
def test_roundtrip_is_lossless(name):
    sc = load_scenario(name)
    again = Scenario.loads(sc.dumps())
    assert again == sc
    assert again.to_dict() == sc.to_dict()
    assert yaml.safe_load(again.dumps()) == sc.to_dict()


def test_fig_parameters():
    f2, f3 = load_scenario("fig2"), load_scenario("fig3")
    assert (f2.constraint.alpha, f2.constraint.metric.beta, f2.constraint.gamma) == (30.0, 0.05, 0.1)
    assert f2.constraint.metric.kind == "cvar" and len(f2.world["sources"]) == 2 and f2.graph.time_budget == 3.0
    assert (f3.constraint.alpha, f3.constraint.metric.beta) == (10.0, 0.2)
    assert len(f3.world["sources"]) == 1 and len(f3.world["obstacles"]) == 1 and f3.planner == "smooth"


BASE = """
id: t
start: [1, 1]
goal: {type: circle, center: [5, 5], radius: 0.5}
world: {}
constraint: {alpha: 10}
"""


def test_defaults_fill_in():
    sc = Scenario.loads(BASE)
    assert sc.world["sigma_n2"] == 0.5 and sc.kernel.signal_variance == 50.0
    assert sc.constraint.metric.kind == "cvar" and sc.planner == "graph"


@pytest.mark.parametrize(
    "patch, where",
    [
        ({"constraint": {"alpha": 10, "metric": {"type": "cvar", "beta": 1.5}}}, "constraint.metric"),
        ({"constraint": {"alpha": 10, "metric": {"type": "worst"}}}, "constraint.metric"),
        ({"constraint": {"alpha": 10, "gamma": -1}}, "constraint"),
        ({"world": {"obstacles": [{"type": "hexagon"}]}}, "world"),
        ({"world": {"colour": "red"}}, "world"),
        ({"planner": {"kind": "rrt"}}, "planner.kind"),
        ({"planner": {"kind": "graph", "batches": 0}}, "planner"),
        ({"planner": {"kind": "smooth", "weights": {"sigma_obs": 0}}}, "planner.weights"),
        ({"kernel": {"lengthscales": [2, -1]}}, "kernel"),
        ({"start": [1, 2, 3]}, "start"),
        ({"start": [10, 10], "world": {"obstacles": [{"type": "rect", "lo": [9, 9], "hi": [11, 11]}]}}, "start"),
        ({"seed": -3}, "seed"),
        ({"extra": 1}, "unknown"),
    ],
)
def test_config_errors_name_the_field(patch, where):
    d = yaml.safe_load(BASE)
    d.update(patch)
    with pytest.raises(ConfigError, match=where):
        Scenario.from_dict(d)


def test_missing_field():
    d = yaml.safe_load(BASE)
    del d["goal"]
    with pytest.raises(ConfigError, match="goal"):
        Scenario.from_dict(d)


def test_yaml_error_has_line():
    with pytest.raises(ConfigError, match="line 2, column"):
        Scenario.loads("id: t\nstart: [1, 1]]\n")


def test_run_trivial_near_straight(tmp_path):
    sc = load_scenario("trivial")
    tr = run(sc, out_dir=tmp_path)
    straight = np.linalg.norm(np.subtract(sc.goal.center, sc.start)) - sc.goal.radius
    assert tr.reached_goal and tr.path_length <= 1.05 * straight
    assert {p.name for p in tmp_path.iterdir()} == {"trace.jsonl", "timings.json", "scenario.yaml"}
    assert load_scenario(tmp_path / "scenario.yaml") == sc


def test_trace_file_format(fig2_run):
    out, trace = fig2_run
    lines = [json.loads(line) for line in (out / "trace.jsonl").read_text().splitlines()]
    steps = [r for r in lines if r["kind"] == "step"]
    assert [r["step"] for r in steps] == list(range(len(steps)))
    assert {"state", "observation", "plan_id", "trigger", "hazard"} <= set(steps[0])
    assert lines[-1]["kind"] == "summary" and lines[-1]["status"] == "goal"
    back = read_trace(out / "trace.jsonl")
    assert back.dumps() == trace.dumps()


def test_export_truth_trivial_is_zero():
    xs, ys, V = export_field(load_scenario("trivial"), "truth", 1.0)
    assert V.shape == (len(ys), len(xs)) and np.all(V == 0)


def test_export_cost_prior_is_one():
    sc = load_scenario("trivial")
    prior_cvar = cvar(GaussianBelief(0.0, sc.kernel.signal_variance), 0.05)
    assert sc.constraint.alpha > prior_cvar
    _, _, V = export_field(sc, "cost", 0.5)
    assert np.all(V == 1.0)


def test_export_posterior_mean_consistent_with_trace(fig2_run):
    _, trace = fig2_run
    sc = load_scenario("fig2")
    model_pts, model_vals = trace.dataset_points, trace.dataset_values
    m = GpModel(sc.kernel, sc.world["sigma_n2"], sc.world["bounds"], model_pts, model_vals)
    mu = m.posterior(trace.states).mean
    assert np.all(np.abs(mu - trace.observations) <= 3 * np.sqrt(sc.world["sigma_n2"]))
    xs, ys, V = export_field(sc, "posterior-mean", 0.5, (model_pts, model_vals))
    np.testing.assert_allclose(V[4, 6], m.posterior([xs[6], ys[4]]).mean, rtol=1e-12)


def test_export_unknown_field():
    with pytest.raises(ValueError):
        export_field(load_scenario("trivial"), "pressure", 1.0)


def test_grid_csv_roundtrip(tmp_path):
    xs, ys = np.linspace(0, 2, 5), np.linspace(0, 1, 3)
    V = np.random.default_rng(0).normal(size=(3, 5))
    path = write_grid_csv(tmp_path / "g.csv", xs, ys, V)
    assert path.read_text().splitlines()[0].startswith("y\\x,0.0,0.5")
    x2, y2, V2 = read_grid_csv(path)
    np.testing.assert_array_equal(x2, xs)
    np.testing.assert_array_equal(y2, ys)
    np.testing.assert_array_equal(V2, V)


# -- command line ---------------------------------------------------------------


def test_cli_list(capsys):
    assert cli.main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    assert "fig2" in out and "fig3" in out and "trivial" in out


def test_cli_run_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--scenario", "trivial", "--seed", "3", "--deterministic", "--out", str(a)]) == 0
    assert cli.main(["run", "--scenario", "trivial", "--seed", "3", "--deterministic", "--out", str(b)]) == 0
    assert (a / "trace.jsonl").read_bytes() == (b / "trace.jsonl").read_bytes()
    assert load_scenario(a / "scenario.yaml").seed == 3


def test_cli_run_failure_exit(tmp_path):
    d = yaml.safe_load(BASE)
    d["world"] = {"obstacles": [{"type": "rect", "lo": [3, -1], "hi": [4, 21]}]}
    d["planner"] = {"kind": "graph", "batches": 1, "max_plan_retries": 0}
    path = tmp_path / "walled.yaml"
    path.write_text(yaml.safe_dump(d))
    assert cli.main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 1


def test_cli_config_error_exit(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text(BASE.replace("alpha: 10", "alpha: ten"))
    assert cli.main(["run", "--scenario", str(path)]) == 2
    assert "constraint" in capsys.readouterr().err
    assert cli.main(["run", "--scenario", str(tmp_path / "missing.yaml")]) == 2


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as e:
        cli.main(["launch"])
    assert e.value.code == 2
    assert cli.main(["export-field", "--scenario", "trivial", "--what", "pressure"]) == 2


def test_cli_export(tmp_path, fig2_run):
    out, _ = fig2_run
    dest = tmp_path / "pm.csv"
    assert cli.main(["export-field", "--scenario", "fig2", "--what", "posterior-mean", "--resolution", "1.0",
                     "--trace", str(out / "trace.jsonl"), "--out", str(dest)]) == 0
    xs, ys, V = read_grid_csv(dest)
    assert V.shape == (21, 21) and np.ptp(V) > 0


def test_cli_verify(capsys):
    assert cli.main(["verify", "--samples", "1000000"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "oracles passed" in out
