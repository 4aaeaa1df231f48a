from typing import Any, Mapping, Sequence, Union

import numpy as np
import jax.numpy as jnp


PRNGKey = Any
Array = Union[np.ndarray, jnp.ndarray]
ArrayLike = Union[Array, Sequence[float]]
# named planner inputs such as L, delta_mu, p, d
PlanParams = Mapping[str, float]
# distribution description consumed by jaxsw.data.generators.generate
DistributionSpec = Mapping[str, Any]
