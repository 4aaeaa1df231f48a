"""
Max-sliced 1-Wasserstein distance.

MSW_1(mu, nu) = max over unit theta of W_1(theta#mu, theta#nu). The objective
is piecewise smooth and not concave, so `msw1` runs a multi-start projected
ascent with finite-difference tangent gradients and reports the exact value at
the best direction found, which is always a valid lower bound. `msw1_grid` is
the brute-force maximum over a deterministic grid for d <= 3.
"""
from typing import Optional

import flax
import jax
import jax.numpy as jnp
import numpy as np
from absl import logging

from jaxsw.common.common import nonpytree_field
from jaxsw.common.errors import InvalidParameterError, InvalidWitnessError
from jaxsw.common.piecewise import PiecewiseLinear
from jaxsw.common.typing import ArrayLike
from jaxsw.data.measures import EmpiricalMeasure
from jaxsw.distances.sliced import per_direction_wp_pow
from jaxsw.transport.ot1d import w1_1d, w1_sorted
from jaxsw.transport.projections import grid_sphere, project, project_sorted, sample_sphere

FD_STEP = 1e-4
WITNESS_TOL = 1e-12


class MaxSlicedResult(flax.struct.PyTreeNode):
    value: float
    argmax: jnp.ndarray
    trace: jnp.ndarray  # best value reached by each restart
    restarts_used: int = nonpytree_field()
    iterations: Optional[jnp.ndarray] = None


def _check_pair(mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    if mu.d != nu.d:
        raise InvalidParameterError(f"measures live in R^{mu.d} and R^{nu.d}")


def _objective(theta, x_points, x_weights, y_points, y_weights):
    xv, xc = project_sorted(x_points, x_weights, theta[None])
    yv, yc = project_sorted(y_points, y_weights, theta[None])
    return w1_sorted(xv[0], xc[0], yv[0], yc[0])


def _normalize(v):
    return v / jnp.linalg.norm(v)


def _tangent_basis(theta):
    """Orthonormal basis of the tangent space at theta, from a Householder reflection."""
    d = theta.shape[0]
    e1 = jnp.zeros(d, theta.dtype).at[0].set(1.0)
    u = theta + jnp.where(theta[0] >= 0, 1.0, -1.0) * e1
    reflection = jnp.eye(d, dtype=theta.dtype) - 2.0 * jnp.outer(u, u) / jnp.dot(u, u)
    return reflection[:, 1:].T


def _ascent_direction(theta, data, h):
    basis = _tangent_basis(theta)
    objective = lambda t: _objective(_normalize(t), *data)
    forward = jax.vmap(lambda b: objective(theta + h * b))(basis)
    backward = jax.vmap(lambda b: objective(theta - h * b))(basis)
    grad = ((forward - backward) / (2.0 * h)) @ basis
    norm = jnp.linalg.norm(grad)
    return jnp.where(norm > 0, grad / jnp.where(norm > 0, norm, 1.0), 0.0)


@jax.jit
def _ascend(theta0, data, max_iters, tol, step_size, min_step, max_step):
    h = FD_STEP
    value0 = _objective(theta0, *data)
    direction0 = _ascent_direction(theta0, data, h)

    def cond(state):
        _, _, _, _, it, done = state
        return jnp.logical_and(jnp.logical_not(done), it < max_iters)

    def body(state):
        theta, value, direction, eta, it, _ = state
        trial = _normalize(theta + eta * direction)
        trial_value = _objective(trial, *data)
        accept = trial_value > value
        new_theta = jnp.where(accept, trial, theta)
        new_value = jnp.where(accept, trial_value, value)
        new_direction = jax.lax.cond(
            accept, lambda: _ascent_direction(trial, data, h), lambda: direction
        )
        new_eta = jnp.where(accept, jnp.minimum(2.0 * eta, max_step), 0.5 * eta)
        done = (
            (accept & (trial_value - value < tol))
            | (~accept & (new_eta < min_step))
            | jnp.all(new_direction == 0)
        )
        return new_theta, new_value, new_direction, new_eta, it + 1, done

    state = (theta0, value0, direction0, jnp.asarray(step_size, jnp.float64), jnp.int32(0), jnp.all(direction0 == 0))
    theta, value, _, _, it, _ = jax.lax.while_loop(cond, body, state)
    return theta, value, it


def _canonical_sign(dirs: jnp.ndarray) -> jnp.ndarray:
    """Flips each row so its first nonzero coordinate is positive."""
    first = jnp.take_along_axis(dirs, jnp.argmax(dirs != 0, axis=-1)[:, None], axis=-1)
    return dirs * jnp.where(first < 0, -1.0, 1.0)


def initial_directions(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    restarts: int,
    seed: int,
    init_dirs: Optional[ArrayLike] = None,
) -> jnp.ndarray:
    """
    Starting points: explicit `init_dirs` first, then the mean-gap direction
    when it is nonzero, then uniform draws up to `restarts` seeded starts.
    """
    starts = []
    if init_dirs is not None:
        init_dirs = jnp.asarray(init_dirs, dtype=jnp.float64).reshape(-1, mu.d)
        starts.append(init_dirs / jnp.linalg.norm(init_dirs, axis=-1, keepdims=True))
    uniform = sample_sphere(mu.d, restarts, seed).dirs
    gap = mu.mean() - nu.mean()
    gap_norm = float(jnp.linalg.norm(gap))
    if gap_norm > 0:
        uniform = uniform.at[0].set(gap / gap_norm)
    else:
        logging.info("Mean gap is zero; all restarts start from uniform directions.")
    starts.append(uniform)
    return _canonical_sign(jnp.concatenate(starts, axis=0))


def msw1(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    restarts: int = 8,
    max_iters: int = 200,
    tol: float = 1e-9,
    seed: int = 0,
    step_size: float = 0.5,
    min_step: float = 1e-9,
    max_step: float = 1.0,
    init_dirs: Optional[ArrayLike] = None,
) -> MaxSlicedResult:
    _check_pair(mu, nu)
    if restarts < 1:
        raise InvalidParameterError(f"restarts must be >= 1, got {restarts}")
    if max_iters < 0:
        raise InvalidParameterError(f"max_iters must be >= 0, got {max_iters}")

    if mu.d == 1:
        # S^0 = {-1, +1} and the objective is even
        theta = jnp.ones(1)
        value = w1_1d(project(mu, theta), project(nu, theta))
        return MaxSlicedResult(
            value=value, argmax=theta, trace=jnp.full(1, value), restarts_used=1
        )

    starts = initial_directions(mu, nu, restarts, seed, init_dirs)
    data = (mu.points, mu.weights, nu.points, nu.weights)
    thetas, values, iterations = jax.vmap(
        _ascend, in_axes=(0, None, None, None, None, None, None)
    )(starts, data, max_iters, tol, step_size, min_step, max_step)

    # np.argmax keeps the first of tied restarts
    best = int(np.argmax(np.asarray(values)))
    theta = _normalize(thetas[best])
    value = w1_1d(project(mu, theta), project(nu, theta))
    logging.debug("msw1: best restart %d of %d, value %.6g", best, starts.shape[0], value)
    return MaxSlicedResult(
        value=value,
        argmax=theta,
        trace=values,
        restarts_used=int(starts.shape[0]),
        iterations=iterations,
    )


def msw1_grid(mu: EmpiricalMeasure, nu: EmpiricalMeasure, resolution: int) -> MaxSlicedResult:
    _check_pair(mu, nu)
    grid = grid_sphere(mu.d, resolution)
    values = per_direction_wp_pow(mu, nu, grid.dirs, 1.0)
    best = int(np.argmax(np.asarray(values)))
    return MaxSlicedResult(
        value=float(values[best]),
        argmax=grid.dirs[best],
        trace=values,
        restarts_used=grid.k,
    )


def dual_witness_check(
    mu: EmpiricalMeasure, nu: EmpiricalMeasure, theta: ArrayLike, g: PiecewiseLinear
) -> float:
    """(mu - nu)(g(theta^T .)) for a 1-Lipschitz g with g(0) = 0; a lower bound on MSW_1."""
    _check_pair(mu, nu)
    theta = jnp.asarray(theta, dtype=jnp.float64).reshape(-1)
    if theta.shape[0] != mu.d:
        raise InvalidParameterError(f"direction has dimension {theta.shape[0]}, measures have {mu.d}")
    if abs(float(jnp.linalg.norm(theta)) - 1.0) > 1e-9:
        raise InvalidParameterError("witness direction must be a unit vector")
    lipschitz = g.lipschitz_constant()
    if lipschitz > 1.0 + WITNESS_TOL:
        raise InvalidWitnessError(f"witness has Lipschitz constant {lipschitz:.17g} > 1")
    if abs(float(g(0.0))) > WITNESS_TOL:
        raise InvalidWitnessError(f"witness must vanish at 0, got g(0) = {float(g(0.0)):.17g}")
    return float(mu.weights @ g(mu.points @ theta) - nu.weights @ g(nu.points @ theta))
