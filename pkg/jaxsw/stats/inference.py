"""
Two-sample tests with pooled-bootstrap calibration, sub-Gaussian concentration
bounds, and the convergence-rate harness.
"""
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence

import flax
import jax
import jax.numpy as jnp
import numpy as np
import scipy.stats
from absl import logging

from jaxsw.common.common import derive_seed, key_from_seed, nonpytree_field, parallel_map
from jaxsw.common.errors import InvalidParameterError
from jaxsw.common.reporting import csv_text, dumps
from jaxsw.common.typing import DistributionSpec
from jaxsw.data.generators import generate
from jaxsw.data.measures import EmpiricalMeasure
from jaxsw.distances.maxsliced import msw1
from jaxsw.distances.sliced import sw_p
from jaxsw.stats.limits import reference_tables, sliced_w1_against_tables
from jaxsw.transport.projections import DirectionSet, sample_sphere

MSW1 = "msw1"
SW1 = "sw1"
REJECT = "reject"
RETAIN = "retain"
MIN_BOOT_REPS = 100
MIN_RATE_REPS = 10
# calibrated stand-in for the unspecified constant of the sqrt(n) lower rate bound
ROOTN_FLOOR = 0.05

MSW1_SUBGAUSSIAN = "msw1_subgaussian"
SW1_SUBGAUSSIAN = "sw1_subgaussian"

# default estimator settings, mirrored by configs.run_config.get_estimator_config
ESTIMATOR_DEFAULTS = {
    "num_directions": 200,
    "direction_seed": 0,
    "restarts": 8,
    "max_iters": 200,
    "tol": 1e-9,
    "optimizer_seed": 0,
}


class TestReport(flax.struct.PyTreeNode):
    statistic_kind: str = nonpytree_field()
    m: int = nonpytree_field()
    n: int = nonpytree_field()
    statistic_value: float = nonpytree_field()
    bootstrap_draws: np.ndarray = nonpytree_field()
    critical_value: float = nonpytree_field()
    alpha: float = nonpytree_field()
    decision: str = nonpytree_field()
    seed: int = nonpytree_field()
    replicate_seeds: List[int] = nonpytree_field()
    estimator_config: Dict[str, Any] = nonpytree_field()

    __test__ = False  # not a pytest class

    @property
    def rejected(self) -> bool:
        return self.decision == REJECT

    def to_dict(self) -> Dict[str, Any]:
        draws = np.asarray(self.bootstrap_draws)
        return {
            "statistic_kind": self.statistic_kind,
            "m": self.m,
            "n": self.n,
            "statistic_value": self.statistic_value,
            "bootstrap_draws": draws,
            "bootstrap_summary": {
                "mean": float(draws.mean()),
                "std": float(draws.std()),
                "min": float(draws.min()),
                "max": float(draws.max()),
            },
            "critical_value": self.critical_value,
            "alpha": self.alpha,
            "decision": self.decision,
            "seed": self.seed,
            "replicate_seeds": list(self.replicate_seeds),
            "estimator_config": dict(self.estimator_config),
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self) -> str:
        rows = ((i, s, float(v)) for i, (s, v) in enumerate(zip(self.replicate_seeds, self.bootstrap_draws)))
        return csv_text(["replicate", "seed", "bootstrap_draw"], rows)


def _setting(config: Optional[Mapping], name: str):
    if config is not None and name in config:
        return config[name]
    return ESTIMATOR_DEFAULTS[name]


def _estimator_settings(config: Optional[Mapping]) -> Dict[str, Any]:
    return {name: _setting(config, name) for name in ESTIMATOR_DEFAULTS}


def make_statistic(statistic_kind: str, d: int, estimator_config: Optional[Mapping] = None):
    """
    Returns distance(x, y) with every random choice frozen by the config: one
    direction set for sw1, one optimizer seed for msw1.
    """
    settings = _estimator_settings(estimator_config)
    if statistic_kind == SW1:
        dirs = sample_sphere(d, int(settings["num_directions"]), int(settings["direction_seed"]))
        return lambda x, y: sw_p(x, y, 1.0, dirs).value
    if statistic_kind == MSW1:
        return lambda x, y: msw1(
            x,
            y,
            restarts=int(settings["restarts"]),
            max_iters=int(settings["max_iters"]),
            tol=float(settings["tol"]),
            seed=int(settings["optimizer_seed"]),
        ).value
    raise InvalidParameterError(f"unknown statistic {statistic_kind!r}, expected 'msw1' or 'sw1'")


def two_sample_test(
    X: EmpiricalMeasure,
    Y: EmpiricalMeasure,
    statistic_kind: str,
    alpha: float,
    boot_reps: int,
    estimator_config: Optional[Mapping] = None,
    seed: int = 0,
    num_workers: int = 1,
    progress: bool = False,
) -> TestReport:
    """
    Rejects equality of distributions when sqrt(mn/N) D(X, Y) exceeds the
    (1 - alpha) quantile of the same statistic on pooled-bootstrap splits.
    Replicate r resamples N = m + n points from the pooled multiset with seed
    derive_seed(seed, r + 1); the first m go to X.
    """
    if X.d != Y.d:
        raise InvalidParameterError(f"samples live in R^{X.d} and R^{Y.d}")
    if not (X.is_uniform and Y.is_uniform):
        raise InvalidParameterError("the pooled bootstrap needs equally weighted samples")
    if X.n < 2 or Y.n < 2:
        raise InvalidParameterError(f"need m, n >= 2, got m={X.n}, n={Y.n}")
    if boot_reps < MIN_BOOT_REPS:
        raise InvalidParameterError(f"boot_reps must be >= {MIN_BOOT_REPS}, got {boot_reps}")
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")

    m, n = X.n, Y.n
    N = m + n
    scale = math.sqrt(m * n / N)
    distance = make_statistic(statistic_kind, X.d, estimator_config)
    statistic_value = scale * distance(X, Y)

    pooled = jnp.concatenate([X.points, Y.points], axis=0)
    replicate_seeds = [derive_seed(seed, r + 1) for r in range(boot_reps)]

    def replicate(rep_seed):
        idx = jax.random.randint(key_from_seed(rep_seed), (N,), 0, N)
        resampled = pooled[idx]
        return scale * distance(
            EmpiricalMeasure.create(resampled[:m]), EmpiricalMeasure.create(resampled[m:])
        )

    draws = np.asarray(
        parallel_map(replicate, replicate_seeds, num_workers=num_workers, progress=progress, desc="bootstrap")
    )
    critical_value = float(np.quantile(np.sort(draws), 1.0 - alpha, method="midpoint"))
    decision = REJECT if statistic_value > critical_value else RETAIN
    logging.info(
        "%s test: statistic %.6g, critical value %.6g -> %s",
        statistic_kind,
        statistic_value,
        critical_value,
        decision,
    )
    return TestReport(
        statistic_kind=statistic_kind,
        m=m,
        n=n,
        statistic_value=float(statistic_value),
        bootstrap_draws=draws,
        critical_value=critical_value,
        alpha=float(alpha),
        decision=decision,
        seed=int(seed),
        replicate_seeds=replicate_seeds,
        estimator_config=_estimator_settings(estimator_config),
    )


def _concentration_scale(kind: str, sigma2: float, d: int) -> float:
    """c with bound 2 exp(-n t^2 / (c sigma2))."""
    if not sigma2 > 0:
        raise InvalidParameterError(f"sigma2 must be positive, got {sigma2}")
    if d < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {d}")
    if kind == MSW1_SUBGAUSSIAN:
        return 32.0 * d * sigma2
    if kind == SW1_SUBGAUSSIAN:
        return 4.0 * sigma2
    raise InvalidParameterError(f"unknown concentration bound {kind!r}")


def concentration_bound(kind: str, n: int, t: float, sigma2: float, d: int = 1) -> float:
    """
    Tail bound on |D(mu_n, mu) - E D(mu_n, mu)| >= t for a sigma2-sub-Gaussian
    measure: 2 exp(-n t^2 / (32 d sigma2)) for msw1, 2 exp(-n t^2 / (4 sigma2))
    for sw1. Not truncated at one.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if t < 0:
        raise InvalidParameterError(f"t must be >= 0, got {t}")
    c = _concentration_scale(kind, sigma2, d)
    return 2.0 * math.exp(-n * t**2 / c)


def concentration_radius(kind: str, n: int, delta: float, sigma2: float, d: int = 1) -> float:
    """Smallest t with concentration_bound(kind, n, t, sigma2, d) <= delta."""
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if not 0 < delta <= 2:
        raise InvalidParameterError(f"delta must lie in (0, 2], got {delta}")
    c = _concentration_scale(kind, sigma2, d)
    return math.sqrt(c * math.log(2.0 / delta) / n)


class RateTable(flax.struct.PyTreeNode):
    n_grid: List[int] = nonpytree_field()
    mean_distance: List[float] = nonpytree_field()
    std_error: List[float] = nonpytree_field()
    reps: int = nonpytree_field()
    fitted_slope: float = nonpytree_field()
    slope_stderr: float = nonpytree_field()
    slope_defined: bool = nonpytree_field()
    # sqrt(n) * mean / E||X - EX||, the normalization of the lower rate bound
    rootn_ratio: List[float] = nonpytree_field()
    mean_abs_deviation: float = nonpytree_field()
    distance: str = nonpytree_field()
    seed: int = nonpytree_field()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "distance": self.distance,
            "n_grid": list(self.n_grid),
            "mean_distance": list(self.mean_distance),
            "std_error": list(self.std_error),
            "reps": self.reps,
            "fitted_slope": self.fitted_slope,
            "slope_stderr": self.slope_stderr,
            "slope_defined": self.slope_defined,
            "rootn_ratio": list(self.rootn_ratio),
            "meets_rootn_floor": self.meets_rootn_floor(),
            "mean_abs_deviation": self.mean_abs_deviation,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self) -> str:
        rows = zip(self.n_grid, self.mean_distance, self.std_error, self.rootn_ratio)
        return csv_text(["n", "mean_distance", "std_error", "rootn_ratio"], rows)

    def meets_rootn_floor(self, floor: float = ROOTN_FLOOR) -> bool:
        """sqrt(n) * mean_distance >= floor * E||X - EX|| at every grid point."""
        return all(np.isfinite(r) and r >= floor for r in self.rootn_ratio)


def fit_log_slope(n_grid: Sequence[int], means: Sequence[float]):
    """Least-squares slope of log(mean) on log(n); NaN when a mean is not positive."""
    means = np.asarray(means, dtype=np.float64)
    if len(n_grid) < 2 or np.any(means <= 0) or not np.all(np.isfinite(means)):
        logging.warning("Rate slope undefined for means %s.", means)
        return float("nan"), float("nan"), False
    fit = scipy.stats.linregress(np.log(np.asarray(n_grid, dtype=np.float64)), np.log(means))
    return float(fit.slope), float(fit.stderr), True


def rate_experiment(
    spec: DistributionSpec,
    distance: str,
    n_grid: Sequence[int],
    reps: int,
    estimator_config: Optional[Mapping] = None,
    seed: int = 0,
    reference: Optional[EmpiricalMeasure] = None,
    ref_size: int = 100_000,
    num_workers: int = 1,
    progress: bool = False,
) -> RateTable:
    """
    Mean distance between an n-point sample of `spec` and a frozen reference
    sample, for every n in `n_grid`, with a log-log slope fit. The reference
    uses seed index 0; replicate r at grid position i uses 1 + i * reps + r.
    """
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(n < 1 for n in n_grid) or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise InvalidParameterError(f"n_grid must be strictly ascending positive counts, got {n_grid}")
    if reps < MIN_RATE_REPS:
        raise InvalidParameterError(f"reps must be >= {MIN_RATE_REPS}, got {reps}")
    if distance not in (SW1, MSW1):
        raise InvalidParameterError(f"unknown distance {distance!r}, expected 'sw1' or 'msw1'")

    if reference is None:
        reference = generate(spec, ref_size, derive_seed(seed, 0))
    settings = _estimator_settings(estimator_config)

    if distance == SW1:
        dirs: DirectionSet = sample_sphere(
            reference.d, int(settings["num_directions"]), int(settings["direction_seed"])
        )
        tables = reference_tables(reference, dirs)

        def evaluate(sample):
            per_dir = sliced_w1_against_tables(sample.points, sample.weights, dirs.dirs, tables)
            return float(dirs.quad_weights @ per_dir)

    else:
        measure = make_statistic(MSW1, reference.d, estimator_config)

        def evaluate(sample):
            return measure(sample, reference)

    jobs = [(i, r) for i in range(len(n_grid)) for r in range(reps)]

    def job(ir):
        i, r = ir
        sample = generate(spec, n_grid[i], derive_seed(seed, 1 + i * reps + r))
        return evaluate(sample)

    values = np.asarray(
        parallel_map(job, jobs, num_workers=num_workers, progress=progress, desc=f"{distance} rates")
    ).reshape(len(n_grid), reps)

    means = values.mean(axis=1)
    std_error = values.std(axis=1, ddof=1) / math.sqrt(reps)
    slope, slope_stderr, defined = fit_log_slope(n_grid, means)
    scale = reference.mean_abs_deviation()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.sqrt(np.asarray(n_grid, dtype=np.float64)) * means / scale
    return RateTable(
        n_grid=n_grid,
        mean_distance=[float(v) for v in means],
        std_error=[float(v) for v in std_error],
        reps=int(reps),
        fitted_slope=slope,
        slope_stderr=slope_stderr,
        slope_defined=defined,
        rootn_ratio=[float(v) for v in ratio],
        mean_abs_deviation=scale,
        distance=distance,
        seed=int(seed),
    )
