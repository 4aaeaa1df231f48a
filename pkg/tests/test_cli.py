import json

import numpy as np
import pytest

from jaxsw import cli
from jaxsw.configs.run_config import get_config
from jaxsw.data.generators import generate
from jaxsw.data.csv_io import write_measure_csv


def run(command, tmp_path, **overrides):
    config = get_config(command)
    config.out = str(tmp_path / f"{command}.json")
    for name, value in overrides.items():
        config[name] = value
    code, report = cli.execute(command, config)
    if report is not None:
        with open(config.out) as f:
            assert json.load(f)["command"] == command
    return code, report


def write_points(tmp_path, name, points):
    path = tmp_path / name
    path.write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in points))
    return str(path)


def test_msw1_of_two_point_masses(tmp_path):
    x = write_points(tmp_path, "x.csv", [[0.0, 0.0]])
    y = write_points(tmp_path, "y.csv", [[3.0, 4.0]])
    code, report = run("distance", tmp_path, x=x, y=y, kind="msw1", seed=1)
    assert code == cli.EXIT_OK
    assert report["value"] == pytest.approx(5.0, rel=1e-10)


def test_one_dimensional_distance(tmp_path):
    x = write_points(tmp_path, "x.csv", [[0.0], [2.0]])
    y = write_points(tmp_path, "y.csv", [[1.0]])
    code, report = run("distance", tmp_path, x=x, y=y, kind="w1d", p=2.0, seed=1)
    assert code == cli.EXIT_OK
    assert report["value"] == pytest.approx(1.0)


def test_sliced_distance_with_a_planned_budget(tmp_path):
    x = write_points(tmp_path, "x.csv", [[0.0, 0.0], [1.0, 0.0]])
    y = write_points(tmp_path, "y.csv", [[0.0, 1.0], [1.0, 2.0]])
    code, report = run("distance", tmp_path, x=x, y=y, kind="sw", plan="epsilon=0.5,delta=0.1", seed=2)
    assert code == cli.EXIT_OK
    assert report["num_directions"] == report["plan"]["n_required"]
    assert report["value"] > 0


def test_gaussian_direction_distance(tmp_path):
    x = write_points(tmp_path, "x.csv", [[0.0, 0.0]])
    y = write_points(tmp_path, "y.csv", [[1.0, 1.0]])
    code, report = run("distance", tmp_path, x=x, y=y, kind="sw-tilde", num_directions=50, seed=3)
    assert code == cli.EXIT_OK
    assert report["estimand"] == "sw_tilde_p_pow"


def test_missing_seed_is_a_usage_error(tmp_path):
    x = write_points(tmp_path, "x.csv", [[0.0]])
    assert run("distance", tmp_path, x=x, y=x)[0] == cli.EXIT_USAGE


def test_missing_file_is_a_usage_error(tmp_path):
    code, report = run("distance", tmp_path, x=str(tmp_path / "nope.csv"), y=str(tmp_path / "nope.csv"), seed=1)
    assert code == cli.EXIT_USAGE and report is None


def test_malformed_csv_is_a_usage_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,oops\n")
    assert run("distance", tmp_path, x=str(bad), y=str(bad), seed=1)[0] == cli.EXIT_USAGE


def test_unknown_command():
    assert cli.execute("train", get_config("plan"))[0] == cli.EXIT_USAGE


def _sample_files(tmp_path, shift):
    X = generate({"kind": "gaussian", "mean": [0.0, 0.0]}, 100, 1)
    Y = generate({"kind": "gaussian", "mean": [shift, 0.0]}, 100, 2)
    write_measure_csv(X, str(tmp_path / "x.csv"))
    write_measure_csv(Y, str(tmp_path / "y.csv"))
    return str(tmp_path / "x.csv"), str(tmp_path / "y.csv")


def test_rejection_exit_code(tmp_path):
    x, y = _sample_files(tmp_path, 2.0)
    code, report = run(
        "test", tmp_path, x=x, y=y, statistic="sw1", boot_reps=100, num_directions=50, seed=4
    )
    assert code == cli.EXIT_REJECT
    assert report["decision"] == "reject"


def test_too_few_bootstrap_replicates(tmp_path):
    x, y = _sample_files(tmp_path, 0.0)
    assert run("test", tmp_path, x=x, y=y, statistic="sw1", boot_reps=50, seed=4)[0] == cli.EXIT_USAGE


def test_rates_command(tmp_path):
    csv_out = str(tmp_path / "rates.csv")
    code, report = run(
        "rates",
        tmp_path,
        spec='{"kind": "gaussian", "dim": 2}',
        n_grid=[50, 100],
        reps=10,
        ref_size=1000,
        num_directions=20,
        csv_out=csv_out,
        seed=5,
    )
    assert code == cli.EXIT_OK
    assert report["n_grid"] == [50, 100]
    with open(csv_out) as f:
        assert len(f.read().splitlines()) == 3


def test_limits_commands(tmp_path):
    spec = '{"kind": "gaussian", "dim": 2}'
    code, report = run(
        "limits", tmp_path, spec=spec, reps=50, kernel_ref_size=500, resolution=8, n_quantiles=10, seed=6
    )
    assert code == cli.EXIT_OK
    assert report["reps"] == 50 and report["grid_nodes"] > 0
    code, report = run(
        "limits",
        tmp_path,
        spec=spec,
        statistic="sw1_one_sample",
        n=100,
        reps=5,
        ref_size=1000,
        dirs_per_rep=8,
        seed=6,
    )
    assert code == cli.EXIT_OK
    assert report["statistic_kind"] == "sw1_one_sample"
    code, report = run(
        "limits",
        tmp_path,
        spec=spec,
        statistic="msw1_one_sample",
        n=100,
        reps=3,
        ref_size=1000,
        dirs_per_rep=8,
        restarts=2,
        max_iters=20,
        seed=6,
    )
    assert code == cli.EXIT_OK
    assert report["statistic_kind"] == "msw1_one_sample"


def test_limit_references_are_sized_separately():
    config = get_config("limits")
    assert config.ref_size >= 100_000
    assert config.kernel_ref_size < config.ref_size


def test_unexpected_failure_is_a_runtime_error(tmp_path, monkeypatch):
    def broken(config):
        raise FloatingPointError("overflow in reduction")

    monkeypatch.setitem(cli.commands, "plan", broken)
    assert run("plan", tmp_path) == (cli.EXIT_RUNTIME, None)


def test_bad_spec_is_a_usage_error(tmp_path):
    assert run("limits", tmp_path, spec="{not json", seed=1)[0] == cli.EXIT_USAGE
    assert run("limits", tmp_path, spec='{"kind": "laplace"}', seed=1)[0] == cli.EXIT_USAGE


def test_brackets_command(tmp_path):
    code, report = run("brackets", tmp_path, d=2, covering_epsilon=1.0, delta=1.0, audit_functions=5, seed=7)
    assert code == cli.EXIT_OK
    assert report["count"] == report["expected_count"] == 8
    assert report["sphere_covering_bound"] == 25
    assert report["entropy_integral_infinite"]
    assert report["cover_audit"]["contained"] == 5


def test_bracket_budget_is_a_usage_error(tmp_path):
    assert run("brackets", tmp_path, epsilon=0.001)[0] == cli.EXIT_USAGE


def test_plan_command(tmp_path):
    code, report = run("plan", tmp_path, params="L=1,d=5")
    assert code == cli.EXIT_OK
    assert report["n_required"] == 185


def test_parse_assignments():
    assert cli.parse_assignments("a=1, b=2.5") == {"a": 1.0, "b": 2.5}
    with pytest.raises(cli.InvalidParameterError):
        cli.parse_assignments("a")
