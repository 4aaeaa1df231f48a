"""
Monte Carlo sliced Wasserstein estimators and projection-budget planners.

Estimators average exact one-dimensional W_p (or W_p^p) values over a given
DirectionSet; planners turn an accuracy target (epsilon, delta) and a few
moment quantities into the number of directions that guarantees
P(|estimate - target| >= epsilon) <= delta. Planners never sample and
estimators never plan: `estimate_plan_inputs` sits between the two.
"""
import functools
import math
from typing import Dict, Optional

import flax
import jax
import jax.numpy as jnp
import numpy as np
from absl import logging
from scipy.special import gammaln

from jaxsw.common.common import DEFAULT_BATCH_SIZE, map_in_batches, nonpytree_field
from jaxsw.common.errors import InvalidParameterError
from jaxsw.common.typing import PlanParams
from jaxsw.data.measures import EmpiricalMeasure, moment_p
from jaxsw.transport.ot1d import wp_pow_sorted
from jaxsw.transport.projections import GAUSSIAN, GRID, UNIFORM_SPHERE, DirectionSet, project_sorted

SW_P_POW = "sw_p_pow"
SW_P = "sw_p"
SW_HAT = "sw_hat"
SW_TILDE_P_POW = "sw_tilde_p_pow"


class ProjectionPlan(flax.struct.PyTreeNode):
    variant: str = nonpytree_field()
    epsilon: float = nonpytree_field()
    delta: float = nonpytree_field()
    params: Dict[str, float] = nonpytree_field()
    bound: float = nonpytree_field()
    n_required: int = nonpytree_field()

    def to_dict(self):
        return {
            "variant": self.variant,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "params": dict(self.params),
            "bound": self.bound,
            "n_required": self.n_required,
        }


class SlicedEstimate(flax.struct.PyTreeNode):
    value: float
    per_projection: jnp.ndarray
    std_error: float
    dirs: DirectionSet
    estimand: str = nonpytree_field()
    p: float = nonpytree_field()
    plan: Optional[ProjectionPlan] = nonpytree_field(default=None)

    def summary(self) -> Dict[str, float]:
        values = np.asarray(self.per_projection)
        return {
            "count": int(values.shape[0]),
            "min": float(values.min()),
            "max": float(values.max()),
            "mean": float(values.mean()),
        }


@jax.jit
def _wp_pow_batch(x_points, x_weights, y_points, y_weights, dirs, p):
    xv, xc = project_sorted(x_points, x_weights, dirs)
    yv, yc = project_sorted(y_points, y_weights, dirs)
    return jax.vmap(wp_pow_sorted, in_axes=(0, 0, 0, 0, None))(xv, xc, yv, yc, p)


def per_direction_wp_pow(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    dirs: jnp.ndarray,
    p: float,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> jnp.ndarray:
    """W_p^p between the projections of mu and nu along every row of `dirs`."""
    if mu.d != nu.d:
        raise InvalidParameterError(f"measures live in R^{mu.d} and R^{nu.d}")
    if dirs.shape[-1] != mu.d:
        raise InvalidParameterError(
            f"directions have dimension {dirs.shape[-1]}, measures have {mu.d}"
        )
    if not p >= 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    fn = functools.partial(
        _wp_pow_batch, mu.points, mu.weights, nu.points, nu.weights, p=jnp.float64(p)
    )
    return map_in_batches(fn, dirs, batch_size)


def _std_error(values: jnp.ndarray) -> float:
    k = values.shape[0]
    if k < 2:
        return 0.0
    return float(jnp.std(values, ddof=1) / math.sqrt(k))


def _require_kind(dirs: DirectionSet, allowed):
    if dirs.kind not in allowed:
        raise InvalidParameterError(
            f"direction kind {dirs.kind!r} not accepted here, expected one of {sorted(allowed)}"
        )


def _weighted_mean(values: jnp.ndarray, dirs: DirectionSet) -> float:
    return float(jnp.sum(dirs.quad_weights * values) / jnp.sum(dirs.quad_weights))


def sw_p_pow(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float, dirs: DirectionSet) -> SlicedEstimate:
    _require_kind(dirs, (UNIFORM_SPHERE, GRID))
    values = per_direction_wp_pow(mu, nu, dirs.dirs, p)
    return SlicedEstimate(
        value=_weighted_mean(values, dirs),
        per_projection=values,
        std_error=_std_error(values),
        dirs=dirs,
        estimand=SW_P_POW,
        p=float(p),
    )


def sw_p(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float, dirs: DirectionSet) -> SlicedEstimate:
    powered = sw_p_pow(mu, nu, p, dirs)
    return powered.replace(value=max(powered.value, 0.0) ** (1.0 / p), estimand=SW_P)


def sw_hat(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float, dirs: DirectionSet) -> SlicedEstimate:
    """Mean of per-direction W_p (not powered)."""
    _require_kind(dirs, (UNIFORM_SPHERE, GRID))
    values = jnp.maximum(per_direction_wp_pow(mu, nu, dirs.dirs, p), 0.0) ** (1.0 / p)
    return SlicedEstimate(
        value=_weighted_mean(values, dirs),
        per_projection=values,
        std_error=_std_error(values),
        dirs=dirs,
        estimand=SW_HAT,
        p=float(p),
    )


def c_pd(p: float, d: int) -> float:
    """(2/d)^{1/2} (Gamma(d/2 + p/2) / Gamma(d/2))^{1/p}; c_pd(p, d)^p = E||theta||^p for theta ~ N(0, I/d)."""
    if not p >= 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    if d < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {d}")
    log_ratio = gammaln(d / 2 + p / 2) - gammaln(d / 2)
    return float(math.sqrt(2.0 / d) * math.exp(log_ratio / p))


def sw_tilde_p_pow(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float, dirs: DirectionSet) -> SlicedEstimate:
    """
    Gaussian-direction estimate of the sliced cost under N(0, I/d) directions.
    Directions drawn with variance s are rescaled by (d s)^{-p/2} per projection,
    so variance-1 directions give the d^{-p/2} normalization.
    """
    _require_kind(dirs, (GAUSSIAN,))
    factor = (mu.d * dirs.scale) ** (-p / 2.0)
    values = factor * per_direction_wp_pow(mu, nu, dirs.dirs, p)
    return SlicedEstimate(
        value=_weighted_mean(values, dirs),
        per_projection=values,
        std_error=_std_error(values),
        dirs=dirs,
        estimand=SW_TILDE_P_POW,
        p=float(p),
    )


def rescale_tilde_to_sw(estimate: SlicedEstimate, d: int) -> SlicedEstimate:
    """Turns a Gaussian-direction estimate into an estimate of SW_p^p (division by c_pd^p)."""
    assert estimate.estimand == SW_TILDE_P_POW, estimate.estimand
    c = c_pd(estimate.p, d) ** estimate.p
    return estimate.replace(
        value=estimate.value / c,
        per_projection=estimate.per_projection / c,
        std_error=estimate.std_error / c,
        estimand=SW_P_POW,
    )


def _needs(params: PlanParams, *names):
    missing = [n for n in names if n not in params or params[n] is None]
    if missing:
        raise InvalidParameterError(f"planner is missing parameters {missing}")
    return [float(params[n]) for n in names]


def _sphere_dim(d: float) -> float:
    if d < 2:
        raise InvalidParameterError(f"this planner needs d >= 2, got d={d:g}")
    return d - 1


def _bound_sw_pow(params, epsilon):
    L, d = _needs(params, "L", "d")
    return 2 * L**2 / (_sphere_dim(d) * epsilon**2)


def _bound_sw(params, epsilon):
    L, d, p = _needs(params, "L", "d", "p")
    return 2 * L**2 / (_sphere_dim(d) * epsilon ** (2 * p))


def _bound_sw1_marginal(params, epsilon):
    delta_mu, delta_nu = _needs(params, "delta_mu", "delta_nu")
    return 4 * (delta_mu + delta_nu) ** 2 / epsilon**2


def _bound_sw_hat(params, epsilon):
    L_tilde, d = _needs(params, "L_tilde", "d")
    return 2 * L_tilde**2 / (_sphere_dim(d) * epsilon**2)


def _bound_sw_tilde(params, epsilon):
    L, d, p = _needs(params, "L", "d", "p")
    return 2 * L**2 / (d**p * epsilon**2)


def _bound_sw_tilde_rescaled(params, epsilon):
    L, d, p = _needs(params, "L", "d", "p")
    c = c_pd(p, int(d))
    return 2 * L**2 / (d**p * c**2 * epsilon**2)


# bound on the direction count, before the log(2/delta) factor
PLAN_VARIANTS = {
    "sw_pow": _bound_sw_pow,
    "sw": _bound_sw,
    "sw1_marginal": _bound_sw1_marginal,
    "sw_hat": _bound_sw_hat,
    "sw_tilde": _bound_sw_tilde,
    "sw_tilde_rescaled": _bound_sw_tilde_rescaled,
}


def plan_projections(variant: str, epsilon: float, delta: float, params: PlanParams) -> ProjectionPlan:
    if variant not in PLAN_VARIANTS:
        raise InvalidParameterError(
            f"unknown planner {variant!r}, expected one of {sorted(PLAN_VARIANTS)}"
        )
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    bound = PLAN_VARIANTS[variant](params, float(epsilon)) * math.log(2.0 / delta)
    n_required = math.ceil(bound)
    if n_required < 1:
        logging.warning("Planner %s bound %g is below one; using a single direction.", variant, bound)
        n_required = 1
    return ProjectionPlan(
        variant=variant,
        epsilon=float(epsilon),
        delta=float(delta),
        params={k: float(v) for k, v in params.items() if v is not None},
        bound=float(bound),
        n_required=int(n_required),
    )


def marginal_second_moment(m: EmpiricalMeasure) -> float:
    """max over coordinates i of M_2 of the i-th marginal."""
    return float(jnp.max(jnp.sqrt(m.weights @ m.points**2)))


def estimate_plan_inputs(
    mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float, pilot_dirs: DirectionSet
) -> Dict[str, float]:
    """
    Moment inputs of the planners. Moments are exact; W_p itself is unknown,
    so two stand-ins are returned: the always valid but possibly loose
    w_p_upper = M_p(mu) + M_p(nu) (coupling through a point mass at the
    origin), and w_p_pilot, the largest per-direction W_p over the pilot
    directions (a lower bound on W_p). `L` is built from the upper bound,
    `L_pilot` from the pilot.
    """
    if pilot_dirs.k < 1:
        raise InvalidParameterError("pilot direction set is empty")
    m_mu, m_nu = moment_p(mu, p), moment_p(nu, p)
    moment_sum = m_mu + m_nu
    w_upper = moment_sum
    pilot = per_direction_wp_pow(mu, nu, pilot_dirs.dirs, p)
    w_pilot = float(jnp.max(jnp.maximum(pilot, 0.0) ** (1.0 / p)))
    return {
        "p": float(p),
        "d": float(mu.d),
        "M_p_mu": m_mu,
        "M_p_nu": m_nu,
        "delta_mu": marginal_second_moment(mu),
        "delta_nu": marginal_second_moment(nu),
        "w_p_upper": w_upper,
        "w_p_pilot": w_pilot,
        "L": p * w_upper ** (p - 1) * moment_sum,
        "L_pilot": p * w_pilot ** (p - 1) * moment_sum,
        "L_tilde": moment_sum,
    }
