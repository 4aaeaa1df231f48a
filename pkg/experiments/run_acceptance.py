"""
Full-scale acceptance simulations.

    python experiments/run_acceptance.py \
        --config experiments/configs/acceptance_config.py:coverage --out coverage.json

Each experiment returns a report with a boolean `passed`; the process exits
with status 1 when it is false.
"""
import itertools
import math

import jax
import numpy as np
import tqdm
from absl import app, flags, logging
from ml_collections import config_flags
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from jaxsw.common.common import derive_seed, key_from_seed
from jaxsw.common.reporting import write_json
from jaxsw.data.generators import generate
from jaxsw.data.measures import EmpiricalMeasure, moment_p
from jaxsw.distances.maxsliced import msw1, msw1_grid
from jaxsw.distances.sliced import (
    c_pd,
    estimate_plan_inputs,
    plan_projections,
    sw_p,
    sw_p_pow,
    sw_tilde_p_pow,
)
from jaxsw.stats import brackets, inference, limits
from jaxsw.transport.ot1d import QuantileTable, Sorted1D, w1_1d, w1_against_table, wp_1d
from jaxsw.transport.projections import grid_sphere, sample_gaussian_dirs, sample_sphere

FLAGS = flags.FLAGS

flags.DEFINE_string("out", None, "Report path; stdout when absent.")

config_flags.DEFINE_config_file(
    "config",
    None,
    "File path to the acceptance experiment configuration.",
    lock_config=False,
)


def _rng(seed):
    return np.random.default_rng(np.asarray(jax.random.bits(key_from_seed(seed), (4,))))


def _matching_wp(xs, ys, p):
    n = len(xs)
    best = min(sum(abs(xs[i] - ys[s[i]]) ** p for i in range(n)) for s in itertools.permutations(range(n)))
    return (best / n) ** (1.0 / p)


def ot1d_oracle(config):
    rng = _rng(config.seed)
    worst_wp, worst_w1 = 0.0, 0.0
    for _ in tqdm.trange(config.instances, desc="ot1d"):
        n = int(rng.integers(1, config.max_points + 1))
        xs, ys = rng.normal(size=n), rng.normal(size=n)
        p = float(rng.choice(config.p_values))
        a, b = Sorted1D.from_samples(xs), Sorted1D.from_samples(ys)
        oracle = _matching_wp(xs, ys, p)
        worst_wp = max(worst_wp, abs(wp_1d(a, b, p) - oracle) / max(oracle, 1e-300))
        w1 = w1_1d(a, b)
        worst_w1 = max(worst_w1, abs(w1 - wp_1d(a, b, 1.0)) / max(w1, 1e-300))
    return {
        "max_rel_error_wp": worst_wp,
        "max_rel_error_w1": worst_w1,
        "passed": worst_wp <= 1e-9 and worst_w1 <= 1e-10,
    }


def coverage(config):
    mu = EmpiricalMeasure.create([config.x])
    nu = EmpiricalMeasure.create([config.y])
    reference = sw_p_pow(mu, nu, 1.0, grid_sphere(2, config.reference_resolution)).value
    params = estimate_plan_inputs(mu, nu, 1.0, sample_sphere(2, 100, derive_seed(config.seed, 0)))
    plan = plan_projections("sw_pow", config.epsilon, config.delta, params)
    failures = 0
    for r in tqdm.trange(config.runs, desc="coverage"):
        dirs = sample_sphere(2, plan.n_required, derive_seed(config.seed, r + 1))
        failures += abs(sw_p_pow(mu, nu, 1.0, dirs).value - reference) >= config.epsilon
    slack = 3 * math.sqrt(config.delta * (1 - config.delta) / config.runs)
    rate = failures / config.runs
    return {
        "reference": reference,
        "plan": plan.to_dict(),
        "failure_rate": rate,
        "allowed": config.delta + slack,
        "passed": rate <= config.delta + slack,
    }


def tilde_identity(config):
    worst = max(abs(c_pd(2.0, d) - 1.0) for d in config.dims)
    mu = generate({"kind": "gaussian", "dim": config.d}, config.n, derive_seed(config.seed, 0))
    nu = generate({"kind": "gaussian", "mean": list(config.shift)}, config.n, derive_seed(config.seed, 1))
    tilde = sw_tilde_p_pow(
        mu, nu, 2.0, sample_gaussian_dirs(config.d, config.num_directions, 1.0, derive_seed(config.seed, 2))
    )
    plain = sw_p_pow(mu, nu, 2.0, sample_sphere(config.d, config.num_directions, derive_seed(config.seed, 3)))
    gap = abs(tilde.value - plain.value)
    allowed = 4 * math.hypot(tilde.std_error, plain.std_error)
    return {
        "max_c_pd_error": worst,
        "tilde": tilde.value,
        "plain": plain.value,
        "gap": gap,
        "allowed": allowed,
        "passed": worst <= 1e-12 and gap <= allowed,
    }


def msw1_grid_agreement(config):
    rng = _rng(config.seed)
    chord = 2 * math.sin(math.pi / (2 * config.resolution))
    violations = 0
    for i in tqdm.trange(config.instances, desc="msw1 vs grid"):
        mu = EmpiricalMeasure.create(rng.normal(size=(config.points, 2)))
        nu = EmpiricalMeasure.create(rng.normal(size=(config.points, 2)) * rng.uniform(0.5, 2.0, size=2))
        found = msw1(mu, nu, config.restarts, config.max_iters, seed=derive_seed(config.seed, i)).value
        grid = msw1_grid(mu, nu, config.resolution).value
        allowed = 1e-3 + chord * (moment_p(mu, 1) + moment_p(nu, 1))
        violations += abs(found - grid) > allowed
    shift = np.asarray(config.shift)
    mu = generate({"kind": "gaussian", "dim": 2}, config.shift_samples, derive_seed(config.seed, 10**6))
    nu = generate({"kind": "gaussian", "mean": list(shift)}, config.shift_samples, derive_seed(config.seed, 10**6 + 1))
    recovered = msw1(mu, nu, config.restarts, config.max_iters, seed=config.seed).value
    shift_error = abs(recovered - float(np.linalg.norm(shift)))
    return {
        "grid_violations": int(violations),
        "shift_recovered": recovered,
        "shift_error": shift_error,
        "passed": violations == 0 and shift_error <= config.shift_tolerance,
    }


def sandwich(config):
    rng = _rng(config.seed)
    violations = 0
    for i in tqdm.trange(config.instances, desc="sandwich"):
        n = int(rng.integers(1, config.max_points + 1))
        xs, ys = rng.normal(size=(n, config.d)), rng.normal(size=(n, config.d)) + 0.5
        mu, nu = EmpiricalMeasure.create(xs), EmpiricalMeasure.create(ys)
        cost = cdist(xs, ys)
        rows, cols = linear_sum_assignment(cost)
        exact = cost[rows, cols].mean()
        sliced = sw_p(mu, nu, 1.0, sample_sphere(config.d, config.num_directions, derive_seed(config.seed, i)))
        top = msw1(mu, nu, seed=derive_seed(config.seed, i)).value
        violations += (sliced.value - 4 * sliced.std_error > top + 1e-12) or (top > exact + 1e-9)
    return {"violations": int(violations), "passed": violations == 0}


def rates(config):
    spec = {"kind": "gaussian", "dim": config.dim}
    estimator = {
        "num_directions": config.num_directions,
        "direction_seed": derive_seed(config.seed, 1),
        "restarts": config.restarts,
        "max_iters": config.max_iters,
        "tol": 1e-9,
        "optimizer_seed": derive_seed(config.seed, 2),
    }
    lo, hi = config.slope_range
    report, passed = {}, True
    for distance in ("sw1", "msw1"):
        table = inference.rate_experiment(
            spec,
            distance,
            config.n_grid,
            config.reps,
            estimator,
            seed=config.seed,
            ref_size=config.ref_size,
            num_workers=config.threads,
            progress=True,
        )
        report[distance] = table.to_dict()
        passed &= table.slope_defined and lo <= table.fitted_slope <= hi
        passed &= table.meets_rootn_floor()
    report["passed"] = bool(passed)
    return report


def limit_law(config):
    spec = {"kind": "gaussian", "dim": 2}
    kernel_ref = generate(spec, config.kernel_ref_size, derive_seed(config.seed, 0))
    grid = limits.build_cylinder_grid(kernel_ref, None, config.n_quantiles, config.expand)
    simulated = limits.simulate_limit_one_sample(kernel_ref, grid, config.draws, derive_seed(config.seed, 1))
    empirical = limits.empirical_rootn_distribution(
        spec,
        limits.SW1_ONE_SAMPLE,
        config.n,
        config.draws,
        grid.dirs.k,
        derive_seed(config.seed, 2),
        dirs=grid.dirs,
        ref_size=config.ref_size,
        num_workers=config.threads,
        progress=True,
    )
    ks = limits.ks_distance(simulated, empirical)

    # the same draws on a range 20% longer
    wider = (1.2 * (1.0 + 2.0 * config.expand) - 1.0) / 2.0
    wide_grid = limits.build_cylinder_grid(kernel_ref, grid.dirs, config.n_quantiles, wider)
    widened = limits.simulate_limit_one_sample(kernel_ref, wide_grid, config.draws, derive_seed(config.seed, 1))
    simulated_mean = float(np.mean(simulated.draws))
    truncation_change = abs(float(np.mean(widened.draws)) - simulated_mean) / simulated_mean

    # on the line, S^0 = {-1, +1} and the sliced statistic is the plain W_1
    line = {"kind": "uniform_cube", "dim": 1}
    sliced_line = limits.empirical_rootn_distribution(
        line,
        limits.SW1_ONE_SAMPLE,
        config.n,
        config.draws,
        2,
        derive_seed(config.seed, 3),
        dirs=grid_sphere(1, 2),
        ref_size=config.ref_size,
        num_workers=config.threads,
    )
    reference = generate(line, config.ref_size, derive_seed(config.seed, 4))
    table = QuantileTable.create(np.asarray(reference.points)[:, 0])
    classical = []
    for r in tqdm.trange(config.draws, desc="classical 1d"):
        sample = generate(line, config.n, derive_seed(config.seed, 10**6 + r))
        classical.append(math.sqrt(config.n) * w1_against_table(Sorted1D.from_samples(sample.points[:, 0]), table))
    ks_line = limits.ks_distance(sliced_line, limits.LimitSample(draws=np.asarray(classical), statistic_kind="classical"))
    return {
        "ks": ks,
        "ks_1d": ks_line,
        "simulated_mean": simulated_mean,
        "empirical_mean": float(np.mean(empirical.draws)),
        "truncation_change": truncation_change,
        "passed": ks <= config.ks_tolerance
        and ks_line <= config.ks_tolerance_1d
        and truncation_change < config.truncation_tolerance,
    }


def bootstrap(config):
    base = {"kind": "gaussian", "dim": 2}
    shifted = {"kind": "gaussian", "mean": [config.shift, 0.0]}
    report, passed = {}, True
    for statistic in config.statistics:
        estimator = {
            "num_directions": config.num_directions,
            "direction_seed": derive_seed(config.seed, 0),
            "restarts": config.restarts,
            "max_iters": config.max_iters,
            "tol": 1e-9,
            "optimizer_seed": derive_seed(config.seed, 0),
        }
        rates_by_case = {}
        for case, spec_y, runs in (("null", base, config.null_runs), ("alternative", shifted, config.alt_runs)):
            rejections = 0
            for r in tqdm.trange(runs, desc=f"{statistic} {case}"):
                run_seed = derive_seed(config.seed, 1000 * r + 1)
                X = generate(base, config.m, derive_seed(run_seed, 0))
                Y = generate(spec_y, config.m, derive_seed(run_seed, 1))
                result = inference.two_sample_test(
                    X,
                    Y,
                    statistic,
                    config.alpha,
                    config.boot_reps,
                    estimator,
                    seed=run_seed,
                    num_workers=config.threads,
                )
                rejections += result.rejected
            rates_by_case[case] = rejections / runs
        report[statistic] = rates_by_case
        passed &= rates_by_case["null"] <= config.max_null_rate and rates_by_case["alternative"] >= config.min_power
    report["passed"] = bool(passed)
    return report


def bracket_cover(config):
    report, passed = {"cases": []}, True
    for M, epsilon in config.cases:
        bracket_set = brackets.build_brackets(M, epsilon)
        for i in tqdm.trange(config.functions, desc=f"brackets M={M} eps={epsilon}"):
            f = brackets.random_zigzag(M, config.pieces, derive_seed(config.seed, i))
            brackets.bracket_membership(f, bracket_set)
        audit = bracket_set.gap_audit()
        ok = len(bracket_set) == brackets.expected_count(M, epsilon) and audit["all_within_epsilon"]
        report["cases"].append({"M": M, "epsilon": epsilon, **audit, "passed": ok})
        passed &= ok
    report["passed"] = bool(passed)
    return report


def concentration(config):
    value = inference.concentration_bound(inference.MSW1_SUBGAUSSIAN, 1000, 0.5, 1.0, 2)
    rel_error = abs(value - 2 * math.exp(-250 / 64)) / (2 * math.exp(-250 / 64))
    monotone = True
    for kind in (inference.MSW1_SUBGAUSSIAN, inference.SW1_SUBGAUSSIAN):
        for n, t, s, d in itertools.product(config.n_values, config.t_values, config.sigma2_values, config.d_values):
            b = inference.concentration_bound(kind, n, t, s, d)
            monotone &= inference.concentration_bound(kind, n, t + 0.1, s, d) <= b
            monotone &= inference.concentration_bound(kind, 2 * n, t, s, d) <= b
            monotone &= inference.concentration_bound(kind, n, t, 2 * s, d) >= b
            monotone &= inference.concentration_bound(kind, n, t, s, d + 1) >= b
    return {"value": value, "rel_error": rel_error, "monotone": bool(monotone), "passed": rel_error <= 1e-6 and monotone}


EXPERIMENTS = {
    "ot1d_oracle": ot1d_oracle,
    "coverage": coverage,
    "tilde_identity": tilde_identity,
    "msw1_grid": msw1_grid_agreement,
    "sandwich": sandwich,
    "rates": rates,
    "limit_law": limit_law,
    "bootstrap": bootstrap,
    "brackets": bracket_cover,
    "concentration": concentration,
}


def main(_):
    config = FLAGS.config
    logging.info("Running acceptance experiment %s", config.experiment)
    report = EXPERIMENTS[config.experiment](config)
    report["config"] = config.to_dict()
    write_json(report, FLAGS.out)
    logging.info("%s: %s", config.experiment, "passed" if report["passed"] else "FAILED")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    app.run(main)
