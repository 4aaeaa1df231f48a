"""
Directions on the sphere, Gaussian directions, deterministic low-dimensional
grids, and pushforward of measures onto a direction.
"""
from typing import Optional

import flax
import jax
import jax.numpy as jnp
import numpy as np

from jaxsw.common.common import key_from_seed, nonpytree_field
from jaxsw.common.errors import InvalidParameterError, UnsupportedDimensionError
from jaxsw.common.typing import ArrayLike
from jaxsw.data.measures import EmpiricalMeasure
from jaxsw.transport.ot1d import Sorted1D

UNIFORM_SPHERE = "uniform_sphere"
GAUSSIAN = "gaussian"
GRID = "grid"

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


class DirectionSet(flax.struct.PyTreeNode):
    dirs: jnp.ndarray  # (k, d)
    quad_weights: jnp.ndarray  # (k,), 1/k for every kind
    kind: str = nonpytree_field()
    seed: Optional[int] = nonpytree_field(default=None)
    # variance of each coordinate for gaussian directions
    scale: Optional[float] = nonpytree_field(default=None)

    @property
    def k(self) -> int:
        return self.dirs.shape[0]

    @property
    def d(self) -> int:
        return self.dirs.shape[1]

    @classmethod
    def from_array(cls, dirs: ArrayLike, kind: str = GRID) -> "DirectionSet":
        dirs = jnp.asarray(dirs, dtype=jnp.float64)
        if dirs.ndim == 1:
            dirs = dirs[None]
        k = dirs.shape[0]
        return cls(dirs=dirs, quad_weights=jnp.full(k, 1.0 / k), kind=kind)


def _check_counts(d: int, k: int):
    if d < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {d}")
    if k < 1:
        raise InvalidParameterError(f"direction count must be >= 1, got {k}")


def sample_sphere(d: int, k: int, seed: int) -> DirectionSet:
    """i.i.d. uniform directions on S^{d-1} from normalized standard normals."""
    _check_counts(d, k)
    rng = key_from_seed(seed)
    rng, key = jax.random.split(rng)
    raw = jax.random.normal(key, (k, d), dtype=jnp.float64)
    norms = jnp.linalg.norm(raw, axis=-1)
    # a zero draw has probability zero; replace it rather than divide by it
    while bool(jnp.any(norms == 0)):
        rng, key = jax.random.split(rng)
        raw = jnp.where((norms == 0)[:, None], jax.random.normal(key, (k, d), dtype=jnp.float64), raw)
        norms = jnp.linalg.norm(raw, axis=-1)
    dirs = raw / norms[:, None]
    return DirectionSet(
        dirs=dirs, quad_weights=jnp.full(k, 1.0 / k), kind=UNIFORM_SPHERE, seed=int(seed)
    )


def sample_gaussian_dirs(d: int, k: int, variance: float, seed: int) -> DirectionSet:
    """i.i.d. N(0, variance * I_d) rows, not normalized. Typical variances are 1/d and 1."""
    _check_counts(d, k)
    if not variance > 0:
        raise InvalidParameterError(f"variance must be positive, got {variance}")
    raw = jax.random.normal(key_from_seed(seed), (k, d), dtype=jnp.float64)
    return DirectionSet(
        dirs=jnp.sqrt(variance) * raw,
        quad_weights=jnp.full(k, 1.0 / k),
        kind=GAUSSIAN,
        seed=int(seed),
        scale=float(variance),
    )


def grid_sphere(d: int, resolution: int) -> DirectionSet:
    """
    Deterministic directions with equal quadrature weights: {-1, +1} for d=1,
    `resolution` equally spaced angles for d=2 and a Fibonacci sphere of
    `resolution` points for d=3.
    """
    if d == 1:
        dirs = np.array([[-1.0], [1.0]])
    elif d == 2:
        if resolution < 1:
            raise InvalidParameterError(f"resolution must be >= 1, got {resolution}")
        angles = 2.0 * np.pi * np.arange(resolution) / resolution
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    elif d == 3:
        if resolution < 1:
            raise InvalidParameterError(f"resolution must be >= 1, got {resolution}")
        i = np.arange(resolution) + 0.5
        z = 1.0 - 2.0 * i / resolution
        r = np.sqrt(1.0 - z**2)
        phi = GOLDEN_ANGLE * i
        dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    else:
        raise UnsupportedDimensionError(f"deterministic sphere grids exist for d <= 3, got d={d}")
    return DirectionSet.from_array(dirs, kind=GRID)


def _check_direction(m: EmpiricalMeasure, theta: jnp.ndarray):
    if theta.shape[-1] != m.d:
        raise InvalidParameterError(
            f"direction has dimension {theta.shape[-1]} but the measure lives in R^{m.d}"
        )


def project(m: EmpiricalMeasure, theta: ArrayLike) -> Sorted1D:
    """Pushforward of `m` under x -> theta^T x, tie-merged."""
    theta = jnp.asarray(theta, dtype=jnp.float64).reshape(-1)
    _check_direction(m, theta)
    return Sorted1D.from_samples(np.asarray(m.points @ theta), np.asarray(m.weights))


@jax.jit
def project_sorted(points: jnp.ndarray, weights: jnp.ndarray, dirs: jnp.ndarray):
    """
    Batched pushforward: returns (k, n) ascending projected values and their
    cumulative weights, unmerged.
    """
    projected = dirs @ points.T
    order = jnp.argsort(projected, axis=-1)
    values = jnp.take_along_axis(projected, order, axis=-1)
    cumweights = jnp.cumsum(weights[order], axis=-1)
    return values, cumweights


def project_measure(m: EmpiricalMeasure, dirs: DirectionSet):
    _check_direction(m, dirs.dirs)
    return project_sorted(m.points, m.weights, dirs.dirs)
