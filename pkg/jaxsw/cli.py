"""
Command line front end.

    python -m jaxsw.cli <command> [--flag=value ...]

Commands: distance, test, rates, limits, brackets, plan. Every command starts
from `configs.run_config.get_config(command)` and overrides the entries whose
flags were given explicitly. Reports are JSON on stdout or in --out.

Exit codes: 0 success or retain, 2 usage error, 3 reject, 4 runtime or
numerical error.
"""
import json
import sys
from typing import Any, Dict, Tuple

import numpy as np
from absl import app, flags, logging
from ml_collections import ConfigDict

from jaxsw.common.common import derive_seed
from jaxsw.common.errors import (
    BudgetExceededError,
    ConstructionBugError,
    InvalidMeasureError,
    InvalidParameterError,
    InvalidWitnessError,
    NumericalDegeneracyError,
    UnsupportedDimensionError,
)
from jaxsw.common.reporting import write_csv, write_json
from jaxsw.configs.run_config import get_config, get_estimator_config
from jaxsw.data.csv_io import read_measure_csv
from jaxsw.data.generators import generate
from jaxsw.distances import distances
from jaxsw.distances.sliced import estimate_plan_inputs, plan_projections
from jaxsw.stats import brackets, inference, limits
from jaxsw.transport.ot1d import wp_1d
from jaxsw.transport.projections import grid_sphere, project, sample_gaussian_dirs, sample_sphere

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_REJECT = 3
EXIT_RUNTIME = 4

USAGE_ERRORS = (
    InvalidParameterError,
    InvalidMeasureError,
    UnsupportedDimensionError,
    InvalidWitnessError,
    BudgetExceededError,
)
RUNTIME_ERRORS = (NumericalDegeneracyError, ConstructionBugError)

PLAN_FOR_KIND = {"sw": "sw", "sw-hat": "sw_hat", "sw-tilde": "sw_tilde"}

FLAGS = flags.FLAGS

flags.DEFINE_integer("seed", None, "Seed for every random choice of the run.")
flags.DEFINE_integer("threads", 1, "Maximum number of worker threads.")
flags.DEFINE_string("out", None, "Report path; stdout when absent.")
flags.DEFINE_bool("progress", False, "Show progress bars.")

flags.DEFINE_string("x", None, "CSV file of the first sample.")
flags.DEFINE_string("y", None, "CSV file of the second sample.")
flags.DEFINE_string("kind", "sw", "Distance: sw, sw-hat, sw-tilde, msw1 or w1d.")
flags.DEFINE_float("p", 1.0, "Order of the Wasserstein distance.")
flags.DEFINE_integer("num_directions", 1000, "Number of projection directions.")
flags.DEFINE_string("plan", None, "Planner target, e.g. 'epsilon=0.05,delta=0.05'.")
flags.DEFINE_string("plan_variant", None, "Planner variant; defaults to the one matching --kind.")
flags.DEFINE_string("plan_params", None, "Planner input overrides, e.g. 'L=1,d=5'.")
flags.DEFINE_integer("pilot_directions", 100, "Pilot directions used to estimate planner inputs.")
flags.DEFINE_integer("restarts", 8, "Restarts of the max-sliced ascent.")
flags.DEFINE_integer("max_iters", 200, "Iterations per restart of the max-sliced ascent.")
flags.DEFINE_float("tol", 1e-9, "Improvement below which the max-sliced ascent stops.")

flags.DEFINE_string("statistic", None, "Test or limit statistic.")
flags.DEFINE_float("alpha", 0.05, "Test level.")
flags.DEFINE_integer("boot_reps", 500, "Bootstrap replicates.")

flags.DEFINE_string("spec", None, "Distribution spec as JSON, e.g. '{\"kind\": \"gaussian\", \"dim\": 2}'.")
flags.DEFINE_string("spec_nu", None, "Second distribution spec as JSON.")
flags.DEFINE_string("distance", "sw1", "Distance of the rate experiment: sw1 or msw1.")
flags.DEFINE_list("n_grid", None, "Sample sizes of the rate experiment.")
flags.DEFINE_integer("reps", None, "Replicates.")
flags.DEFINE_integer("ref_size", None, "Size of the frozen reference sample.")
flags.DEFINE_integer("kernel_ref_size", 20_000, "Reference size the limit covariance is counted over.")
flags.DEFINE_integer("n", 10_000, "Sample size of empirical statistics.")
flags.DEFINE_integer("resolution", None, "Sphere grid resolution.")
flags.DEFINE_integer("n_quantiles", 60, "Quantile nodes per direction of the limit grid.")
flags.DEFINE_float("expand", 0.1, "Relative widening of the limit grid range.")
flags.DEFINE_integer("dirs_per_rep", 64, "Directions of the empirical statistics.")
flags.DEFINE_string("csv_out", None, "CSV path for tables and draw vectors.")

flags.DEFINE_float("M", 1.0, "Half-width of the bracketed interval.")
flags.DEFINE_float("epsilon", None, "Bracket width or planner accuracy.")
flags.DEFINE_integer("audit_functions", 0, "Random Lipschitz functions checked against the brackets.")
flags.DEFINE_integer("audit_pieces", 64, "Linear pieces of each audited function.")
flags.DEFINE_integer("d", None, "Dimension for the covering and entropy bounds.")
flags.DEFINE_float("covering_epsilon", None, "Radius of the sphere covering bound.")
flags.DEFINE_float("delta", None, "Planner failure probability or moment excess of the entropy bound.")
flags.DEFINE_float("m2", 0.0, "Second moment of the entropy bound.")
flags.DEFINE_float("m2pd", 0.0, "(2 + delta)-th moment of the entropy bound.")

flags.DEFINE_string("variant", "sw_pow", "Planner variant.")
flags.DEFINE_string("params", None, "Planner inputs, e.g. 'L=1,d=5'.")


def parse_assignments(text: str) -> Dict[str, float]:
    """'a=1,b=2' -> {'a': 1.0, 'b': 2.0}."""
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, value = item.partition("=")
        if not sep:
            raise InvalidParameterError(f"expected name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise InvalidParameterError(f"not a number in {item!r}") from None
    return out


def parse_spec(text: str) -> Dict[str, Any]:
    if text is None:
        raise InvalidParameterError("a distribution spec is required (--spec)")
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidParameterError(f"spec is not valid JSON: {e}") from e
    if not isinstance(spec, dict):
        raise InvalidParameterError("spec must be a JSON object")
    return spec


def config_from_flags(command: str) -> ConfigDict:
    config = get_config(command)
    for name in config.keys():
        if name in FLAGS and FLAGS[name].present:
            value = FLAGS[name].value
            if name == "n_grid":
                value = [int(v) for v in value]
            config[name] = value
    return config


def _require_seed(config: ConfigDict) -> int:
    if config.seed is None:
        raise InvalidParameterError("--seed is required")
    return int(config.seed)


def _estimator_config(config: ConfigDict, seed: int) -> ConfigDict:
    estimator = get_estimator_config()
    for name in ("num_directions", "restarts", "max_iters", "tol"):
        if name in config:
            estimator[name] = config[name]
    estimator.direction_seed = derive_seed(seed, 0)
    estimator.optimizer_seed = derive_seed(seed, 0)
    return estimator


def _read_pair(config: ConfigDict):
    if config.x is None or config.y is None:
        raise InvalidParameterError("--x and --y are required")
    X, Y = read_measure_csv(config.x), read_measure_csv(config.y)
    if X.d != Y.d:
        raise InvalidParameterError(f"{config.x} has {X.d} columns but {config.y} has {Y.d}")
    return X, Y


def cmd_distance(config: ConfigDict) -> Tuple[int, Dict[str, Any]]:
    seed = _require_seed(config)
    X, Y = _read_pair(config)
    report = {"command": "distance", "kind": config.kind, "p": config.p, "d": X.d}

    if config.kind == "w1d":
        if X.d != 1:
            raise UnsupportedDimensionError("w1d needs one-dimensional samples")
        report["value"] = wp_1d(project(X, [1.0]), project(Y, [1.0]), config.p)
    elif config.kind == "msw1":
        result = distances["msw1"](
            X, Y, restarts=config.restarts, max_iters=config.max_iters, tol=config.tol, seed=seed
        )
        report.update(
            value=result.value,
            argmax=result.argmax,
            restarts_used=result.restarts_used,
            trace=result.trace,
        )
    elif config.kind in PLAN_FOR_KIND:
        k = config.num_directions
        if config.plan is not None:
            target = parse_assignments(config.plan)
            if "epsilon" not in target or "delta" not in target:
                raise InvalidParameterError("--plan needs epsilon and delta")
            pilot = sample_sphere(X.d, config.pilot_directions, derive_seed(seed, 1))
            params = estimate_plan_inputs(X, Y, config.p, pilot)
            if config.plan_params is not None:
                params.update(parse_assignments(config.plan_params))
            plan = plan_projections(
                config.plan_variant or PLAN_FOR_KIND[config.kind],
                target["epsilon"],
                target["delta"],
                params,
            )
            k = plan.n_required
            report["plan"] = plan.to_dict()
        if config.kind == "sw-tilde":
            dirs = sample_gaussian_dirs(X.d, k, 1.0, seed)
        else:
            dirs = sample_sphere(X.d, k, seed)
        estimate = distances[config.kind](X, Y, config.p, dirs)
        report.update(
            value=estimate.value,
            std_error=estimate.std_error,
            estimand=estimate.estimand,
            num_directions=dirs.k,
            per_projection=estimate.summary(),
        )
    else:
        raise InvalidParameterError(f"unknown distance kind {config.kind!r}")
    return EXIT_OK, report


def cmd_test(config: ConfigDict) -> Tuple[int, Dict[str, Any]]:
    seed = _require_seed(config)
    X, Y = _read_pair(config)
    result = inference.two_sample_test(
        X,
        Y,
        config.statistic,
        config.alpha,
        config.boot_reps,
        estimator_config=_estimator_config(config, seed),
        seed=seed,
        num_workers=config.threads,
        progress=config.progress,
    )
    report = {"command": "test", **result.to_dict()}
    return (EXIT_REJECT if result.rejected else EXIT_OK), report


def cmd_rates(config: ConfigDict) -> Tuple[int, Dict[str, Any]]:
    seed = _require_seed(config)
    table = inference.rate_experiment(
        parse_spec(config.spec),
        config.distance,
        config.n_grid,
        config.reps,
        estimator_config=_estimator_config(config, seed),
        seed=seed,
        ref_size=config.ref_size,
        num_workers=config.threads,
        progress=config.progress,
    )
    if config.csv_out is not None:
        with open(config.csv_out, "w", encoding="utf-8", newline="") as f:
            f.write(table.to_csv())
    return EXIT_OK, {"command": "rates", **table.to_dict()}


def cmd_limits(config: ConfigDict) -> Tuple[int, Dict[str, Any]]:
    seed = _require_seed(config)
    spec = parse_spec(config.spec)
    statistic = config.statistic

    if statistic in (limits.SW1_ONE_SAMPLE, limits.SW1_VS_NU, limits.MSW1_ONE_SAMPLE):
        reference = generate(spec, config.ref_size, derive_seed(seed, 0))
        dirs = grid_sphere(reference.d, config.resolution) if config.resolution else None
        sample = limits.empirical_rootn_distribution(
            spec,
            statistic,
            config.n,
            config.reps,
            config.dirs_per_rep,
            seed,
            reference=reference,
            dirs=dirs,
            spec_nu=parse_spec(config.spec_nu) if config.spec_nu else None,
            ref_size=config.ref_size,
            num_workers=config.threads,
            progress=config.progress,
            msw1_config=dict(restarts=config.restarts, max_iters=config.max_iters, tol=config.tol),
        )
        grid_size = None
    else:
        ref = generate(spec, config.kernel_ref_size, derive_seed(seed, 0))
        refs = [ref]
        if statistic in (limits.ONE_SAMPLE_VS_NU, limits.TWO_SAMPLE_PAIRED):
            ref_nu = generate(parse_spec(config.spec_nu), config.kernel_ref_size, derive_seed(seed, 1))
            refs.append(ref_nu)
        dirs = grid_sphere(ref.d, config.resolution) if config.resolution else None
        grid = limits.build_cylinder_grid(refs, dirs, config.n_quantiles, config.expand)
        draw_seed = derive_seed(seed, 2)
        if statistic == limits.ONE_SAMPLE_L1:
            sample = limits.simulate_limit_one_sample(ref, grid, config.reps, draw_seed)
        elif statistic == limits.ONE_SAMPLE_VS_NU:
            sample = limits.simulate_limit_vs_nu(ref, refs[1], grid, config.reps, draw_seed)
        elif statistic == limits.TWO_SAMPLE_PAIRED:
            sample = limits.simulate_limit_paired(ref, refs[1], grid, config.reps, draw_seed)
        else:
            raise InvalidParameterError(f"unknown limit statistic {statistic!r}")
        grid_size = grid.size

    if config.csv_out is not None:
        limits.write_draws_csv(sample, config.csv_out)
    draws = np.asarray(sample.draws)
    report = {
        "command": "limits",
        "statistic_kind": sample.statistic_kind,
        "reps": int(draws.shape[0]),
        "grid_nodes": grid_size,
        "mean": float(draws.mean()),
        "std": float(draws.std()),
        "quantiles": {
            str(q): float(np.quantile(draws, q)) for q in (0.05, 0.25, 0.5, 0.75, 0.95)
        },
    }
    return EXIT_OK, report


def cmd_brackets(config: ConfigDict) -> Tuple[int, Dict[str, Any]]:
    bracket_set = brackets.build_brackets(config.M, config.epsilon)
    report = {
        "command": "brackets",
        "M": config.M,
        "epsilon": config.epsilon,
        "count": len(bracket_set),
        "expected_count": brackets.expected_count(config.M, config.epsilon),
        "gap_audit": bracket_set.gap_audit(),
    }
    if config.audit_functions > 0:
        seed = _require_seed(config)
        contained = 0
        for i in range(config.audit_functions):
            f = brackets.random_zigzag(config.M, config.audit_pieces, derive_seed(seed, i))
            brackets.bracket_membership(f, bracket_set)
            contained += 1
        report["cover_audit"] = {"functions": config.audit_functions, "contained": contained}
    if config.d is not None:
        if config.covering_epsilon is not None:
            report["sphere_covering_bound"] = brackets.sphere_covering_bound(
                config.d, config.covering_epsilon
            )
        if config.delta is not None:
            value = brackets.entropy_integral_bound(config.d, config.delta, config.m2, config.m2pd)
            report["entropy_integral_bound"] = value
            report["entropy_integral_infinite"] = bool(np.isinf(value))
    return EXIT_OK, report


def cmd_plan(config: ConfigDict) -> Tuple[int, Dict[str, Any]]:
    if config.params is None:
        raise InvalidParameterError("--params is required, e.g. 'L=1,d=5'")
    plan = plan_projections(
        config.variant, config.epsilon, config.delta, parse_assignments(config.params)
    )
    return EXIT_OK, {"command": "plan", **plan.to_dict()}


commands = {
    "distance": cmd_distance,
    "test": cmd_test,
    "rates": cmd_rates,
    "limits": cmd_limits,
    "brackets": cmd_brackets,
    "plan": cmd_plan,
}


def execute(command: str, config: ConfigDict) -> Tuple[int, Dict[str, Any]]:
    """Runs one command; returns the exit code and the report (None on error)."""
    if command not in commands:
        logging.error("Unknown command %r, expected one of %s.", command, sorted(commands))
        return EXIT_USAGE, None
    try:
        code, report = commands[command](config)
    except USAGE_ERRORS as e:
        logging.error("%s", e)
        return EXIT_USAGE, None
    except OSError as e:
        logging.error("Cannot read input: %s", e)
        return EXIT_USAGE, None
    except RUNTIME_ERRORS as e:
        logging.error("%s", e)
        return EXIT_RUNTIME, None
    except Exception:
        logging.exception("Command %r failed.", command)
        return EXIT_RUNTIME, None
    report["config"] = config.to_dict()
    write_json(report, config.out)
    return code, report


def main(argv):
    if len(argv) != 2:
        raise app.UsageError(f"expected one command out of {sorted(commands)}", exitcode=EXIT_USAGE)
    command = argv[1]
    if command not in commands:
        raise app.UsageError(f"unknown command {command!r}", exitcode=EXIT_USAGE)
    code, _ = execute(command, config_from_flags(command))
    return code


if __name__ == "__main__":
    app.run(main)
