"""
Sup-norm brackets for 1-Lipschitz functions on [0, M] vanishing at 0, the
sphere covering bound, and the bracketing entropy integral of the class of
1-Lipschitz functions of one-dimensional projections.

Brackets live on the nodes x_k = k h, h = epsilon / 2, k = 0..K with
K = ceil(M / h). The first cell holds the single bracket [-x, x]; every later
cell doubles each bracket into a "+" continuation (both envelopes rise by h)
and a "-" continuation (both fall by h). The gap is epsilon at every node past
the origin, and there are 2^(K-1) brackets.
"""
import math
from typing import Iterator

import flax
import jax
import jax.numpy as jnp
import numpy as np
from absl import logging
from scipy import integrate

from jaxsw.common.common import key_from_seed, nonpytree_field
from jaxsw.common.errors import (
    BudgetExceededError,
    ConstructionBugError,
    InvalidParameterError,
)
from jaxsw.common.piecewise import PiecewiseLinear

# at most 2^20 brackets
MAX_DOUBLINGS = 20
NODE_TOL = 1e-9


class Bracket(flax.struct.PyTreeNode):
    nodes: jnp.ndarray
    lower: jnp.ndarray
    upper: jnp.ndarray

    def gap(self) -> float:
        return float(jnp.max(self.upper - self.lower))

    def lower_fn(self) -> PiecewiseLinear:
        return PiecewiseLinear.create(self.nodes, self.lower)

    def upper_fn(self) -> PiecewiseLinear:
        return PiecewiseLinear.create(self.nodes, self.upper)

    def contains(self, f: PiecewiseLinear, tol: float = NODE_TOL) -> bool:
        """lower <= f <= upper at the nodes and at f's knots inside the node range."""
        knots = np.asarray(f.knots)
        xs = np.union1d(
            np.asarray(self.nodes),
            knots[(knots >= float(self.nodes[0])) & (knots <= float(self.nodes[-1]))],
        )
        values = np.asarray(f(xs))
        lower = np.interp(xs, np.asarray(self.nodes), np.asarray(self.lower))
        upper = np.interp(xs, np.asarray(self.nodes), np.asarray(self.upper))
        return bool(np.all(lower - tol <= values) and np.all(values <= upper + tol))


class BracketSet(flax.struct.PyTreeNode):
    M: float = nonpytree_field()
    epsilon: float = nonpytree_field()
    nodes: np.ndarray = nonpytree_field()
    # lower envelope node values, one row per bracket
    lower: np.ndarray = nonpytree_field()
    # upper - lower at each node, shared by every bracket
    gaps: np.ndarray = nonpytree_field()

    @property
    def cells(self) -> int:
        return self.nodes.shape[0] - 1

    def __len__(self) -> int:
        return self.lower.shape[0]

    def __getitem__(self, i: int) -> Bracket:
        return Bracket(
            nodes=jnp.asarray(self.nodes),
            lower=jnp.asarray(self.lower[i]),
            upper=jnp.asarray(self.lower[i] + self.gaps),
        )

    @property
    def brackets(self) -> Iterator[Bracket]:
        return (self[i] for i in range(len(self)))

    def max_gap(self) -> float:
        return float(self.gaps.max())

    def gap_audit(self):
        """Sup gap of every bracket (all equal by construction) and the count at epsilon."""
        gaps = np.full(len(self), self.max_gap())
        return {
            "count": len(self),
            "max_gap": float(gaps.max()),
            "min_gap": float(gaps.min()),
            "attaining_epsilon": int(np.sum(np.abs(gaps - self.epsilon) <= NODE_TOL)),
            "all_within_epsilon": bool(np.all(gaps <= self.epsilon + NODE_TOL)),
        }


def cell_count(M: float, epsilon: float) -> int:
    return max(1, math.ceil(M / (epsilon / 2.0) - 1e-12))


def expected_count(M: float, epsilon: float) -> int:
    return 2 ** (cell_count(M, epsilon) - 1)


def build_brackets(M: float, epsilon: float) -> BracketSet:
    if not M > 0 or not epsilon > 0:
        raise InvalidParameterError(f"M and epsilon must be positive, got M={M}, epsilon={epsilon}")
    h = epsilon / 2.0
    K = cell_count(M, epsilon)
    if K - 1 > MAX_DOUBLINGS:
        raise BudgetExceededError(
            f"M={M:g}, epsilon={epsilon:g} needs 2^{K - 1} brackets, more than 2^{MAX_DOUBLINGS}"
        )

    nodes = h * np.arange(K + 1)
    count = 2 ** (K - 1)
    # bit j of the bracket index picks "+" (1) or "-" (0) on cell j + 1, most significant first
    shifts = np.arange(K - 2, -1, -1)
    bits = (np.arange(count)[:, None] >> shifts[None, :]) & 1
    steps = np.concatenate([np.full((count, 1), -h), np.where(bits == 1, h, -h)], axis=1)
    lower = np.concatenate([np.zeros((count, 1)), np.cumsum(steps, axis=1)], axis=1)
    gaps = np.concatenate([[0.0], np.full(K, epsilon)])
    logging.debug("Built %d brackets on %d cells.", count, K)
    return BracketSet(M=float(M), epsilon=float(epsilon), nodes=nodes, lower=lower, gaps=gaps)


def bracket_membership(f: PiecewiseLinear, bracket_set: BracketSet) -> int:
    """Index of a bracket containing the 1-Lipschitz f with f(0) = 0."""
    if f.lipschitz_constant() > 1.0 + NODE_TOL:
        raise InvalidParameterError(f"f has Lipschitz constant {f.lipschitz_constant():.17g} > 1")
    if abs(float(f(0.0))) > NODE_TOL:
        raise InvalidParameterError("f must vanish at 0")
    nodes = bracket_set.nodes
    h = bracket_set.epsilon / 2.0
    values = np.asarray(f(nodes))

    index = 0
    lower = -h
    for k in range(1, bracket_set.cells):
        # the "-" continuation covers [lower - h, lower + h]
        plus = values[k + 1] > lower + h
        index = 2 * index + int(plus)
        lower += h if plus else -h

    if not bracket_set[index].contains(f):
        raise ConstructionBugError(f"bracket {index} does not contain f")
    return index


def sphere_covering_bound(d: int, epsilon: float) -> int:
    """ceil((1 + 4 / epsilon)^d), an upper bound on the epsilon-covering number of S^{d-1}."""
    if d < 1 or not epsilon > 0:
        raise InvalidParameterError(f"need d >= 1 and epsilon > 0, got d={d}, epsilon={epsilon}")
    value = (1.0 + 4.0 / epsilon) ** d
    nearest = round(value)
    # absorb representation error so exact powers do not round up
    if abs(value - nearest) <= 1e-9 * max(1.0, value):
        return int(nearest)
    return int(math.ceil(value))


def entropy_integral_bound(d: int, delta: float, m2: float, m2pd: float) -> float:
    """
    integral over (0, 1] of sqrt(4 log 2 (C / e)^(1 + 2 / delta) + d log(1 + 4 C / e)) de
    with C = sqrt(2 + 8 m2 + 8 m2pd). Infinite when delta <= 2. The substitution
    e = u^k, k = 2 delta / (delta - 2), removes the endpoint singularity.
    """
    if not delta > 0:
        raise InvalidParameterError(f"delta must be positive, got {delta}")
    if m2 < 0 or m2pd < 0:
        raise InvalidParameterError("moments must be nonnegative")
    if d < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {d}")
    if delta <= 2:
        logging.info("Entropy integral diverges for delta = %g <= 2.", delta)
        return math.inf

    C = math.sqrt(2.0 + 8.0 * m2 + 8.0 * m2pd)
    exponent = 1.0 + 2.0 / delta
    k = 2.0 if math.isinf(delta) else 2.0 * delta / (delta - 2.0)

    # with this k the (C / e)^exponent term times the Jacobian squared is constant
    head = 4.0 * math.log(2.0) * C**exponent

    def integrand(u):
        if u <= 0.0:
            return k * math.sqrt(head)
        log_ratio = math.log(4.0 * C) - k * math.log(u)
        tail = d * np.logaddexp(0.0, log_ratio) * u ** (2.0 * k - 2.0)
        return k * math.sqrt(head + tail)

    value, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
    return float(value)


def random_zigzag(M: float, pieces: int, seed: int) -> PiecewiseLinear:
    """A 1-Lipschitz function on [0, M] with f(0) = 0 and random slopes +-1 on `pieces` equal cells."""
    if pieces < 1:
        raise InvalidParameterError(f"pieces must be >= 1, got {pieces}")
    knots = np.linspace(0.0, M, pieces + 1)
    slopes = np.where(np.asarray(jax.random.bernoulli(key_from_seed(seed), 0.5, (pieces,))), 1.0, -1.0)
    values = np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])
    return PiecewiseLinear.create(knots, values)
