"""
Weighted empirical measures in R^d and the moment functionals computed on them.

An `EmpiricalMeasure` is the object every distance in the package consumes:
an n x d matrix of support points plus a length-n probability vector. Weights
need not be equal, so pooled and resampled measures are first-class.
"""
import math
from typing import Optional

import flax
import jax.numpy as jnp
import numpy as np

from jaxsw.common.errors import InvalidMeasureError, InvalidParameterError
from jaxsw.common.typing import ArrayLike

WEIGHT_SUM_TOL = 1e-12


class EmpiricalMeasure(flax.struct.PyTreeNode):
    points: jnp.ndarray  # (n, d)
    weights: jnp.ndarray  # (n,)

    @classmethod
    def create(
        cls, points: ArrayLike, weights: Optional[ArrayLike] = None
    ) -> "EmpiricalMeasure":
        """
        Validates and builds a measure. One-dimensional `points` are read as n
        points on the real line. Absent weights mean the uniform measure.
        """
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise InvalidMeasureError(
                f"points must be an n x d matrix with n, d >= 1, got shape {points.shape}"
            )
        if not np.all(np.isfinite(points)):
            raise InvalidMeasureError("every coordinate must be finite")

        n = points.shape[0]
        if weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.asarray(weights, dtype=np.float64).reshape(-1)
            if weights.shape[0] != n:
                raise InvalidMeasureError(
                    f"got {weights.shape[0]} weights for {n} points"
                )
            check_probability_vector(weights)
        return cls(points=jnp.asarray(points), weights=jnp.asarray(weights))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def is_uniform(self) -> bool:
        w = np.asarray(self.weights)
        return bool(np.all(w == w[0]))

    def mean(self) -> jnp.ndarray:
        return self.weights @ self.points

    def mean_abs_deviation(self) -> float:
        """E||X - EX|| under the measure."""
        centered = self.points - self.mean()
        return float(self.weights @ jnp.linalg.norm(centered, axis=-1))


class MomentSummary(flax.struct.PyTreeNode):
    p: float
    value: float


def check_probability_vector(weights: np.ndarray):
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise InvalidMeasureError("weights must be finite and nonnegative")
    total = math.fsum(weights.tolist())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise InvalidMeasureError(f"weights sum to {total!r}, expected 1")


def moment_p(m: EmpiricalMeasure, p: float) -> float:
    """M_p = (sum_i w_i ||x_i||^p)^(1/p)."""
    if not p >= 1:
        raise InvalidParameterError(f"moment order p must be >= 1, got {p}")
    norms = jnp.linalg.norm(m.points, axis=-1)
    return float(jnp.power(m.weights @ jnp.power(norms, p), 1.0 / p))


def moment_summary(m: EmpiricalMeasure, p: float) -> MomentSummary:
    return MomentSummary(p=float(p), value=moment_p(m, p))


def lambda_21(m: EmpiricalMeasure) -> float:
    """
    Integral over t >= 0 of sqrt(P(||X|| > t)).

    The empirical survival function of the norm is a step function, so the
    integral is evaluated exactly: on [r_{k-1}, r_k) between consecutive
    distinct norms (r_0 = 0) the survival equals the mass at norms >= r_k.
    """
    norms = np.linalg.norm(np.asarray(m.points), axis=-1)
    weights = np.asarray(m.weights)
    radii, inverse = np.unique(norms, return_inverse=True)
    masses = np.bincount(inverse, weights=weights)
    # mass strictly beyond each interval's left end
    tail = np.clip(1.0 - np.concatenate([[0.0], np.cumsum(masses)[:-1]]), 0.0, None)
    lengths = np.diff(np.concatenate([[0.0], radii]))
    return float(np.sum(np.sqrt(tail) * lengths))
