import flax
import jax.numpy as jnp
import numpy as np

from jaxsw.common.errors import InvalidParameterError
from jaxsw.common.typing import ArrayLike


class PiecewiseLinear(flax.struct.PyTreeNode):
    """Continuous piecewise-linear function on the real line.

    Given by strictly increasing `knots` and the `values` at them; beyond the
    end knots it continues with the slope of the end segments (a single knot
    means a constant function).
    """

    knots: jnp.ndarray
    values: jnp.ndarray

    @classmethod
    def create(cls, knots: ArrayLike, values: ArrayLike) -> "PiecewiseLinear":
        knots = np.asarray(knots, dtype=np.float64).reshape(-1)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if knots.shape != values.shape or knots.size == 0:
            raise InvalidParameterError("knots and values must be non-empty and match")
        if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(values))):
            raise InvalidParameterError("knots and values must be finite")
        if np.any(np.diff(knots) <= 0):
            raise InvalidParameterError("knots must be strictly increasing")
        return cls(knots=jnp.asarray(knots), values=jnp.asarray(values))

    @property
    def slopes(self) -> jnp.ndarray:
        return jnp.diff(self.values) / jnp.diff(self.knots)

    def lipschitz_constant(self) -> float:
        if self.knots.shape[0] < 2:
            return 0.0
        return float(jnp.max(jnp.abs(self.slopes)))

    def __call__(self, x) -> jnp.ndarray:
        x = jnp.asarray(x, dtype=jnp.float64)
        inside = jnp.interp(x, self.knots, self.values)
        if self.knots.shape[0] < 2:
            return inside
        slopes = self.slopes
        left = self.values[0] + slopes[0] * (x - self.knots[0])
        right = self.values[-1] + slopes[-1] * (x - self.knots[-1])
        return jnp.where(
            x < self.knots[0], left, jnp.where(x > self.knots[-1], right, inside)
        )
