"""
Exact one-dimensional Wasserstein distances between weighted empirical
measures.

Both CDFs of an empirical pair are step functions, so W_1 and W_p are finite
sums over the merged breakpoint partition; no quadrature is involved. Two
independent formulas are provided:

    W_1     = sum over merged support cells of |F - G| * cell length
    W_p^p   = sum over merged cumulative-weight cells of mass * |F^-1 - G^-1|^p

with F^-1(u) = inf{x : F(x) >= u}. The jitted kernels accept sorted but
unmerged arrays (duplicate values, zero-weight atoms), which is what a batched
projection produces; `Sorted1D` is the merged host-side representation.
"""
import flax
import jax
import jax.numpy as jnp
import numpy as np

from jaxsw.common.errors import InvalidMeasureError, InvalidParameterError
from jaxsw.common.typing import ArrayLike
from jaxsw.data.measures import check_probability_vector


class Sorted1D(flax.struct.PyTreeNode):
    values: jnp.ndarray  # strictly increasing
    cumweights: jnp.ndarray  # strictly increasing, last entry 1

    @classmethod
    def from_samples(cls, values: ArrayLike, weights: ArrayLike = None) -> "Sorted1D":
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.shape[0] < 1:
            raise InvalidMeasureError("need at least one value")
        if not np.all(np.isfinite(values)):
            raise InvalidMeasureError("values must be finite")
        if weights is None:
            weights = np.full(values.shape[0], 1.0 / values.shape[0])
        else:
            weights = np.asarray(weights, dtype=np.float64).reshape(-1)
            if weights.shape[0] != values.shape[0]:
                raise InvalidMeasureError(
                    f"got {weights.shape[0]} weights for {values.shape[0]} values"
                )
            check_probability_vector(weights)

        support, inverse = np.unique(values, return_inverse=True)
        masses = np.bincount(inverse, weights=weights, minlength=support.shape[0])
        keep = masses > 0
        support, masses = support[keep], masses[keep]
        cumweights = np.cumsum(masses)
        cumweights /= cumweights[-1]
        cumweights[-1] = 1.0
        return cls(values=jnp.asarray(support), cumweights=jnp.asarray(cumweights))

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def masses(self) -> jnp.ndarray:
        return jnp.diff(self.cumweights, prepend=0.0)


from_samples = Sorted1D.from_samples


def _cdf_eval(values, cumweights, t):
    """F(t) for sorted atoms; right-continuous."""
    idx = jnp.searchsorted(values, t, side="right")
    return jnp.where(idx > 0, cumweights[jnp.maximum(idx - 1, 0)], 0.0)


def _quantile_eval(values, cumweights, u):
    """F^-1(u) = inf{x : F(x) >= u}, clamped to the support."""
    idx = jnp.searchsorted(cumweights, u, side="left")
    return values[jnp.clip(idx, 0, values.shape[0] - 1)]


@jax.jit
def w1_sorted(xa, ca, xb, cb):
    """W_1 from the CDF representation."""
    grid = jnp.sort(jnp.concatenate([xa, xb]))
    lengths = jnp.diff(grid)
    fa = _cdf_eval(xa, ca, grid[:-1])
    fb = _cdf_eval(xb, cb, grid[:-1])
    return jnp.sum(jnp.abs(fa - fb) * lengths)


@jax.jit
def wp_pow_sorted(xa, ca, xb, cb, p):
    """W_p^p from the quantile representation."""
    levels = jnp.sort(jnp.concatenate([ca, cb]))
    lower = jnp.concatenate([jnp.zeros(1, levels.dtype), levels[:-1]])
    mass = levels - lower
    # on the cell (lower, level] the inverse sits at the first atom with cumweight > lower
    ia = jnp.minimum(jnp.searchsorted(ca, lower, side="right"), xa.shape[0] - 1)
    ib = jnp.minimum(jnp.searchsorted(cb, lower, side="right"), xb.shape[0] - 1)
    return jnp.sum(mass * jnp.abs(xa[ia] - xb[ib]) ** p)


def w1_1d(a: Sorted1D, b: Sorted1D) -> float:
    return float(w1_sorted(a.values, a.cumweights, b.values, b.cumweights))


def wp_pow_1d(a: Sorted1D, b: Sorted1D, p: float) -> float:
    if not p >= 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    return float(wp_pow_sorted(a.values, a.cumweights, b.values, b.cumweights, float(p)))


def wp_1d(a: Sorted1D, b: Sorted1D, p: float) -> float:
    return wp_pow_1d(a, b, p) ** (1.0 / p)


def cdf_at(a: Sorted1D, t: ArrayLike) -> jnp.ndarray:
    return _cdf_eval(a.values, a.cumweights, jnp.asarray(t, dtype=jnp.float64))


def quantile_at(a: Sorted1D, u: ArrayLike) -> jnp.ndarray:
    u = jnp.asarray(u, dtype=jnp.float64)
    if bool(jnp.any((u <= 0) | (u > 1))):
        raise InvalidParameterError("quantile levels must lie in (0, 1]")
    return _quantile_eval(a.values, a.cumweights, u)


class QuantileTable(flax.struct.PyTreeNode):
    """
    A sorted reference with prefix sums of its quantile function,
    prefix[k] = integral of F^-1 over (0, cumweights[k]]. Lets the exact W_1
    between a small sample and a large fixed reference be computed without
    merging the two supports. Arrays may carry a leading batch axis.
    """

    values: jnp.ndarray
    cumweights: jnp.ndarray
    # prefix sums of the quantile function measured from the first atom
    prefix: jnp.ndarray

    @classmethod
    def create(cls, values: ArrayLike, weights: ArrayLike = None) -> "QuantileTable":
        ref = Sorted1D.from_samples(values, weights)
        return cls.from_sorted(ref.values, ref.cumweights)

    @classmethod
    def from_sorted(cls, values: jnp.ndarray, cumweights: jnp.ndarray) -> "QuantileTable":
        masses = jnp.diff(cumweights, prepend=0.0, axis=-1)
        centered = values - values[..., :1]
        return cls(
            values=values,
            cumweights=cumweights,
            prefix=jnp.cumsum(masses * centered, axis=-1),
        )


def _quantile_integral(values, cumweights, prefix, u):
    """integral of F^-1 over (0, u]."""
    k = jnp.clip(jnp.searchsorted(cumweights, u, side="left"), 0, values.shape[0] - 1)
    c_prev = jnp.where(k > 0, cumweights[jnp.maximum(k - 1, 0)], 0.0)
    q_prev = jnp.where(k > 0, prefix[jnp.maximum(k - 1, 0)], 0.0)
    return q_prev + values[k] * (u - c_prev)


@jax.jit
def w1_against_sorted_table(xs, cs, values, cumweights, prefix):
    """W_1 between a sorted sample (xs, cs) and a single reference table."""
    # both sides are measured from the first reference atom, so equal point masses give exactly 0
    origin = values[0]
    xs = xs - origin
    values = values - origin
    lo = jnp.concatenate([jnp.zeros(1, cs.dtype), cs[:-1]])
    hi = cs
    # reference mass below each sample atom, clipped to that atom's cell
    split = jnp.clip(_cdf_eval(values, cumweights, xs), lo, hi)
    q = lambda u: _quantile_integral(values, cumweights, prefix, u)
    q_lo, q_split, q_hi = q(lo), q(split), q(hi)
    below = xs * (split - lo) - (q_split - q_lo)
    above = (q_hi - q_split) - xs * (hi - split)
    return jnp.sum(below + above)


def w1_against_table(sample: Sorted1D, table: QuantileTable) -> float:
    return float(
        w1_against_sorted_table(
            sample.values, sample.cumweights, table.values, table.cumweights, table.prefix
        )
    )

