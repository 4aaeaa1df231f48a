"""
Gaussian-process limit laws of the sliced 1-Wasserstein statistic and the
matching empirical sampling distributions.

The limit process lives on the cylinder S^{d-1} x R. It is discretized on a
`CylinderGrid`: per direction, t-nodes at quantiles of the projected
reference with midpoint cells, so every node carries the weight
(sphere weight) x (cell length). The process covariance at two nodes is

    mu(theta_1^T x <= t_1, theta_2^T x <= t_2) - F(theta_1, t_1) F(theta_2, t_2),

computed by exact counting over the reference sample. Draws of the limit
functional are quadrature sums over the nodes.
"""
import math
from typing import Optional, Sequence, Union

import chex
import flax
import jax
import jax.numpy as jnp
import numpy as np
import scipy.stats
from absl import logging

from jaxsw.common.common import derive_seed, key_from_seed, nonpytree_field, parallel_map
from jaxsw.common.errors import InvalidParameterError, NumericalDegeneracyError
from jaxsw.common.reporting import write_csv
from jaxsw.common.typing import DistributionSpec
from jaxsw.data.generators import generate
from jaxsw.data.measures import EmpiricalMeasure
from jaxsw.distances.maxsliced import msw1
from jaxsw.transport.ot1d import QuantileTable, w1_against_sorted_table, wp_pow_sorted
from jaxsw.transport.projections import DirectionSet, grid_sphere, project_sorted, sample_sphere

ONE_SAMPLE_L1 = "one_sample_L1"
ONE_SAMPLE_VS_NU = "one_sample_vs_nu"
TWO_SAMPLE_PAIRED = "two_sample_paired"

SW1_ONE_SAMPLE = "sw1_one_sample"
SW1_VS_NU = "sw1_vs_nu"
MSW1_ONE_SAMPLE = "msw1_one_sample"

# |F - G| at or below this counts as F = G
TIE_BAND = 1e-9
JITTER_START = 1e-10
JITTER_MAX = 1e-6
# F within this of 0 or 1 makes a node deterministic
DEGENERATE_TOL = 1e-12
KERNEL_CHUNK = 2048
DEFAULT_SPHERE_RESOLUTION = {1: 2, 2: 64, 3: 256}


class CylinderGrid(flax.struct.PyTreeNode):
    dirs: DirectionSet
    dir_index: jnp.ndarray  # (N,) direction of each node
    t_nodes: jnp.ndarray  # (N,) ascending within each direction
    quad_weights: jnp.ndarray  # (N,) sphere weight times cell length

    @property
    def size(self) -> int:
        return self.t_nodes.shape[0]


class LimitSample(flax.struct.PyTreeNode):
    draws: jnp.ndarray
    statistic_kind: str = nonpytree_field()

    def to_dict(self):
        return {"statistic_kind": self.statistic_kind, "draws": np.asarray(self.draws)}


def default_directions(d: int) -> DirectionSet:
    if d not in DEFAULT_SPHERE_RESOLUTION:
        raise InvalidParameterError(
            f"no default direction grid for d={d}; pass an explicit DirectionSet"
        )
    return grid_sphere(d, DEFAULT_SPHERE_RESOLUTION[d])


def _pool(refs: Sequence[EmpiricalMeasure]):
    points = np.concatenate([np.asarray(r.points) for r in refs], axis=0)
    weights = np.concatenate([np.asarray(r.weights) / len(refs) for r in refs])
    return points, weights


def build_cylinder_grid(
    refs: Union[EmpiricalMeasure, Sequence[EmpiricalMeasure]],
    dirs: Optional[DirectionSet] = None,
    n_quantiles: int = 60,
    expand: float = 0.1,
) -> CylinderGrid:
    """
    Nodes at the levels j/(n_quantiles+1) of the pooled projected references
    plus the projected minimum and maximum, deduplicated. Cells are bounded by
    midpoints between nodes; the outer cells reach the projected range widened
    by `expand` times its length on each side. The extreme nodes have F = 1 or
    F equal to the mass at the minimum, so the widening only adds cells where
    the process is zero or nearly so.
    """
    if isinstance(refs, EmpiricalMeasure):
        refs = [refs]
    if n_quantiles < 1:
        raise InvalidParameterError(f"n_quantiles must be >= 1, got {n_quantiles}")
    if expand < 0:
        raise InvalidParameterError(f"expand must be >= 0, got {expand}")
    if dirs is None:
        dirs = default_directions(refs[0].d)
    points, weights = _pool(refs)
    values, cumweights = (np.asarray(a) for a in project_sorted(points, weights, dirs.dirs))
    levels = np.arange(1, n_quantiles + 1) / (n_quantiles + 1)
    sphere_weights = np.asarray(dirs.quad_weights)

    dir_index, t_nodes, quad_weights = [], [], []
    for j in range(dirs.k):
        idx = np.minimum(np.searchsorted(cumweights[j], levels, side="left"), values.shape[1] - 1)
        lo, hi = values[j, 0], values[j, -1]
        nodes = np.unique(np.concatenate([[lo], values[j, idx], [hi]]))
        span = hi - lo if hi > lo else 1.0
        edges = np.concatenate([[lo - expand * span], 0.5 * (nodes[1:] + nodes[:-1]), [hi + expand * span]])
        lengths = np.diff(edges)
        assert np.all(lengths > 0)
        dir_index.append(np.full(nodes.shape[0], j))
        t_nodes.append(nodes)
        quad_weights.append(sphere_weights[j] * lengths)

    return CylinderGrid(
        dirs=dirs,
        dir_index=jnp.asarray(np.concatenate(dir_index)),
        t_nodes=jnp.asarray(np.concatenate(t_nodes)),
        quad_weights=jnp.asarray(np.concatenate(quad_weights)),
    )


@jax.jit
def _indicators(points, dirs, dir_index, t_nodes):
    projected = points @ dirs.T
    return (projected[:, dir_index] <= t_nodes).astype(jnp.float64)


def cdf_on_grid(ref: EmpiricalMeasure, grid: CylinderGrid) -> jnp.ndarray:
    """F(theta, t) at every node."""
    total = jnp.zeros(grid.size)
    for start in range(0, ref.n, KERNEL_CHUNK):
        chunk = slice(start, start + KERNEL_CHUNK)
        ind = _indicators(ref.points[chunk], grid.dirs.dirs, grid.dir_index, grid.t_nodes)
        total = total + ref.weights[chunk] @ ind
    return total


@jax.jit
def _second_moment_chunk(ind, weights):
    return ind.T @ (weights[:, None] * ind)


@jax.jit
def _count_chunk(ind):
    # 0/1 and -1/0/1 products summed in float32 stay exact below 2^24
    ind = ind.astype(jnp.float32)
    return ind.T @ ind


def _kernel(x_points, weights, grid: CylinderGrid, y_points=None):
    """Covariance of I{theta^T X <= t} (minus the same for Y when paired)."""
    uniform = bool(np.all(np.asarray(weights) == np.asarray(weights)[0]))
    n = x_points.shape[0]
    size = grid.size
    second = jnp.zeros((size, size), jnp.float32 if uniform else jnp.float64)
    mean = jnp.zeros(size)
    for start in range(0, n, KERNEL_CHUNK):
        chunk = slice(start, start + KERNEL_CHUNK)
        ind = _indicators(x_points[chunk], grid.dirs.dirs, grid.dir_index, grid.t_nodes)
        if y_points is not None:
            ind = ind - _indicators(y_points[chunk], grid.dirs.dirs, grid.dir_index, grid.t_nodes)
        w = weights[chunk]
        mean = mean + w @ ind
        if uniform:
            second = second + _count_chunk(ind)
        else:
            second = second + _second_moment_chunk(ind, w)
    if uniform:
        second = second.astype(jnp.float64) / n
    kernel = second - jnp.outer(mean, mean)
    chex.assert_shape(kernel, (size, size))
    return 0.5 * (kernel + kernel.T), mean


def covariance_kernel(ref: EmpiricalMeasure, grid: CylinderGrid) -> jnp.ndarray:
    kernel, _ = _kernel(ref.points, ref.weights, grid)
    return kernel


def paired_covariance_kernel(ref_x: EmpiricalMeasure, ref_y: EmpiricalMeasure, grid: CylinderGrid):
    """Covariance of I{theta^T X <= t} - I{theta^T Y <= t} over index-paired reference samples."""
    if ref_x.n != ref_y.n or not (ref_x.is_uniform and ref_y.is_uniform):
        raise InvalidParameterError("paired references need the same number of equally weighted points")
    kernel, _ = _kernel(ref_x.points, ref_x.weights, grid, y_points=ref_y.points)
    return kernel


def _factorize(kernel: jnp.ndarray) -> jnp.ndarray:
    eye = jnp.eye(kernel.shape[0], dtype=kernel.dtype)
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        chol = jnp.linalg.cholesky(kernel + jitter * eye)
        if bool(jnp.all(jnp.isfinite(chol))):
            if jitter > JITTER_START:
                logging.warning("Covariance factorization needed jitter %.0e.", jitter)
            return chol
        jitter *= 10
    raise NumericalDegeneracyError(
        f"covariance of size {kernel.shape[0]} is not factorizable with jitter up to {JITTER_MAX:g}"
    )


def _gaussian_draws(kernel: jnp.ndarray, active: np.ndarray, reps: int, seed: int) -> jnp.ndarray:
    """(reps, N) centered Gaussian vectors with covariance `kernel`; inactive nodes are 0."""
    if reps < 1:
        raise InvalidParameterError(f"reps must be >= 1, got {reps}")
    size = kernel.shape[0]
    idx = np.flatnonzero(active)
    draws = jnp.zeros((reps, size))
    if idx.size == 0:
        return draws
    chol = _factorize(kernel[np.ix_(idx, idx)])
    z = jax.random.normal(key_from_seed(seed), (reps, idx.size), dtype=jnp.float64)
    return draws.at[:, idx].set(z @ chol.T)


def _active_nodes(kernel: jnp.ndarray) -> np.ndarray:
    return np.asarray(jnp.diag(kernel)) > DEGENERATE_TOL


def split_functional(draws: jnp.ndarray, sign: jnp.ndarray, weights: jnp.ndarray) -> jnp.ndarray:
    """
    Quadrature of G over {F > G}, minus over {F < G}, plus |G| over {F = G};
    `sign` is +1, -1 or 0 per node.
    """
    signed = jnp.where(sign == 0, jnp.abs(draws), sign * draws)
    return signed @ weights


def node_signs(ref_mu: EmpiricalMeasure, ref_nu: EmpiricalMeasure, grid: CylinderGrid) -> jnp.ndarray:
    gap = cdf_on_grid(ref_mu, grid) - cdf_on_grid(ref_nu, grid)
    return jnp.where(jnp.abs(gap) <= TIE_BAND, 0.0, jnp.sign(gap))


def simulate_limit_one_sample(ref: EmpiricalMeasure, grid: CylinderGrid, reps: int, seed: int) -> LimitSample:
    """Draws of the L1 norm of the limit process over the cylinder."""
    kernel = covariance_kernel(ref, grid)
    draws = _gaussian_draws(kernel, _active_nodes(kernel), reps, seed)
    return LimitSample(draws=jnp.abs(draws) @ grid.quad_weights, statistic_kind=ONE_SAMPLE_L1)


def simulate_limit_vs_nu(
    ref_mu: EmpiricalMeasure, ref_nu: EmpiricalMeasure, grid: CylinderGrid, reps: int, seed: int
) -> LimitSample:
    """Draws of the limit of sqrt(n) (SW_1(mu_n, nu) - SW_1(mu, nu))."""
    kernel = covariance_kernel(ref_mu, grid)
    draws = _gaussian_draws(kernel, _active_nodes(kernel), reps, seed)
    sign = node_signs(ref_mu, ref_nu, grid)
    return LimitSample(
        draws=split_functional(draws, sign, grid.quad_weights), statistic_kind=ONE_SAMPLE_VS_NU
    )


def simulate_limit_paired(
    ref_x: EmpiricalMeasure, ref_y: EmpiricalMeasure, grid: CylinderGrid, reps: int, seed: int
) -> LimitSample:
    """
    Draws of the limit of sqrt(n) (SW_1(mu_n, nu_n) - SW_1(mu, nu)) for samples
    observed in pairs (X_i, Y_i); the reference rows are the pairs.
    """
    kernel = paired_covariance_kernel(ref_x, ref_y, grid)
    draws = _gaussian_draws(kernel, _active_nodes(kernel), reps, seed)
    sign = node_signs(ref_x, ref_y, grid)
    return LimitSample(
        draws=split_functional(draws, sign, grid.quad_weights), statistic_kind=TWO_SAMPLE_PAIRED
    )


@jax.jit
def sliced_w1_against_tables(points, weights, dirs, table: QuantileTable):
    """Per-direction W_1 between a sample and per-direction reference tables."""
    values, cumweights = project_sorted(points, weights, dirs)
    return jax.vmap(w1_against_sorted_table)(
        values, cumweights, table.values, table.cumweights, table.prefix
    )


def reference_tables(ref: EmpiricalMeasure, dirs: DirectionSet) -> QuantileTable:
    values, cumweights = project_sorted(ref.points, ref.weights, dirs.dirs)
    return QuantileTable.from_sorted(values, cumweights)


def empirical_rootn_distribution(
    spec: DistributionSpec,
    statistic: str,
    n: int,
    reps: int,
    dirs_per_rep: int,
    seed: int,
    reference: Optional[EmpiricalMeasure] = None,
    dirs: Optional[DirectionSet] = None,
    ref_size: int = 100_000,
    spec_nu: Optional[DistributionSpec] = None,
    reference_nu: Optional[EmpiricalMeasure] = None,
    num_workers: int = 1,
    progress: bool = False,
    msw1_config: Optional[dict] = None,
) -> LimitSample:
    """
    `reps` draws of a sqrt(n)-scaled statistic of an n-point sample of `spec`
    against a large frozen reference standing in for the true measure.

    sw1_one_sample: sqrt(n) SW_1(mu_n, mu_ref)
    sw1_vs_nu:      sqrt(n) (SW_1(mu_n, nu_ref) - SW_1(mu_ref, nu_ref))
    msw1_one_sample: sqrt(n) MSW_1(mu_n, mu_ref)

    All replicates share one direction set: `dirs` when given, otherwise
    `dirs_per_rep` uniform directions drawn once from the seed. The reference
    uses seed index 0 and replicate r uses index r + 1. For msw1_one_sample the
    best direction of the set seeds `msw1` (restarts, max_iters and tol from
    `msw1_config`), so each draw is at least the maximum over the set.
    """
    if statistic not in (SW1_ONE_SAMPLE, SW1_VS_NU, MSW1_ONE_SAMPLE):
        raise InvalidParameterError(f"unknown statistic {statistic!r}")
    if n < 1 or reps < 1:
        raise InvalidParameterError(f"need n >= 1 and reps >= 1, got n={n}, reps={reps}")
    if reference is None:
        reference = generate(spec, ref_size, derive_seed(seed, 0))
    if dirs is None:
        if dirs_per_rep < 1:
            raise InvalidParameterError(f"dirs_per_rep must be >= 1, got {dirs_per_rep}")
        dirs = sample_sphere(reference.d, dirs_per_rep, derive_seed(seed, reps + 1))

    offset = 0.0
    if statistic == SW1_VS_NU:
        if reference_nu is None:
            if spec_nu is None:
                raise InvalidParameterError("sw1_vs_nu needs spec_nu or reference_nu")
            reference_nu = generate(spec_nu, ref_size, derive_seed(seed, reps + 2))
        target = reference_tables(reference_nu, dirs)
        xv, xc = project_sorted(reference.points, reference.weights, dirs.dirs)
        offset = float(
            dirs.quad_weights
            @ jax.vmap(wp_pow_sorted, in_axes=(0, 0, 0, 0, None))(
                xv, xc, target.values, target.cumweights, 1.0
            )
        )
    else:
        target = reference_tables(reference, dirs)

    root_n = math.sqrt(n)
    msw1_kwargs = dict(restarts=4, max_iters=200, tol=1e-9)
    msw1_kwargs.update(msw1_config or {})

    def replicate(r):
        sample = generate(spec, n, derive_seed(seed, r + 1))
        per_dir = sliced_w1_against_tables(sample.points, sample.weights, dirs.dirs, target)
        if statistic == MSW1_ONE_SAMPLE:
            best = int(np.argmax(np.asarray(per_dir)))
            result = msw1(
                sample,
                reference,
                seed=derive_seed(seed, reps + 3 + r),
                init_dirs=dirs.dirs[best],
                **msw1_kwargs,
            )
            return root_n * max(float(result.value), float(per_dir[best]))
        return root_n * (float(dirs.quad_weights @ per_dir) - offset)

    draws = parallel_map(
        replicate, range(reps), num_workers=num_workers, progress=progress, desc=statistic
    )
    return LimitSample(draws=jnp.asarray(draws), statistic_kind=statistic)


def ks_distance(a: LimitSample, b: LimitSample) -> float:
    if a.draws.shape[0] == 0 or b.draws.shape[0] == 0:
        raise InvalidParameterError("KS distance needs two nonempty samples")
    return float(scipy.stats.ks_2samp(np.asarray(a.draws), np.asarray(b.draws)).statistic)


def write_draws_csv(sample: LimitSample, path: Optional[str] = None):
    rows = ((i, float(v)) for i, v in enumerate(np.asarray(sample.draws)))
    write_csv(["replicate", sample.statistic_kind], rows, path)
