"""
Synthetic samplers used by the experiments.

Each sampler takes a PRNG key, a sample count and the keyword parameters of
its distribution spec, and returns an (n, d) array. `generate` dispatches on
the sampling spec's "kind" and wraps the sample as a uniform EmpiricalMeasure.
Output is a pure function of (spec, n, seed).
"""
from typing import Sequence

import jax
import jax.numpy as jnp
import numpy as np

from jaxsw.common.common import key_from_seed
from jaxsw.common.errors import InvalidParameterError
from jaxsw.common.typing import DistributionSpec, PRNGKey
from jaxsw.data.measures import EmpiricalMeasure


def gaussian(key: PRNGKey, n: int, *, mean: Sequence[float] = None, dim: int = None, variance: float = 1.0):
    """N(mean, variance * I). Either `mean` or `dim` (zero mean) must be given."""
    if not variance > 0:
        raise InvalidParameterError(f"variance must be positive, got {variance}")
    if mean is None:
        if dim is None:
            raise InvalidParameterError("gaussian spec needs 'mean' or 'dim'")
        mean = np.zeros(int(dim))
    mean = jnp.asarray(mean, dtype=jnp.float64).reshape(-1)
    noise = jax.random.normal(key, (n, mean.shape[0]), dtype=jnp.float64)
    return mean + jnp.sqrt(variance) * noise


def uniform_cube(key: PRNGKey, n: int, *, dim: int, side: float = 1.0):
    """Uniform on the cube [-side/2, side/2]^dim."""
    if not side > 0:
        raise InvalidParameterError(f"side must be positive, got {side}")
    u = jax.random.uniform(key, (n, int(dim)), dtype=jnp.float64)
    return side * (u - 0.5)


def student_t(key: PRNGKey, n: int, *, dim: int, df: float):
    """Independent Student-t coordinates; heavy tails for df <= 2."""
    if not df > 0:
        raise InvalidParameterError(f"df must be positive, got {df}")
    return jax.random.t(key, df, (n, int(dim)), dtype=jnp.float64)


def point_list(key: PRNGKey, n: int, *, points: Sequence[Sequence[float]]):
    """i.i.d. draws from the uniform measure on the listed points."""
    points = jnp.asarray(points, dtype=jnp.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] == 1:
        return jnp.repeat(points, n, axis=0)
    idxs = jax.random.randint(key, (n,), 0, points.shape[0])
    return points[idxs]


DISTRIBUTIONS = {
    "gaussian": gaussian,
    "uniform_cube": uniform_cube,
    "student_t": student_t,
    "point_list": point_list,
}


def generate(spec: DistributionSpec, n: int, seed: int) -> EmpiricalMeasure:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in DISTRIBUTIONS:
        raise InvalidParameterError(
            f"unknown distribution kind {kind!r}, expected one of {sorted(DISTRIBUTIONS)}"
        )
    if int(n) < 1:
        raise InvalidParameterError(f"sample count must be >= 1, got {n}")
    try:
        points = DISTRIBUTIONS[kind](key_from_seed(seed), int(n), **spec)
    except TypeError as e:
        raise InvalidParameterError(f"bad parameters for {kind!r}: {e}") from e
    return EmpiricalMeasure.create(np.asarray(points))
