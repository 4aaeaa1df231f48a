import math

import numpy as np
import pytest

from jaxsw.common.errors import InvalidParameterError, NumericalDegeneracyError
from jaxsw.data.generators import generate
from jaxsw.data.measures import EmpiricalMeasure
from jaxsw.stats import limits
from jaxsw.transport.projections import DirectionSet, grid_sphere


@pytest.fixture(scope="module")
def gaussian_ref():
    return generate({"kind": "gaussian", "dim": 2}, 2000, 0)


@pytest.fixture(scope="module")
def gaussian_grid(gaussian_ref):
    return limits.build_cylinder_grid(gaussian_ref, grid_sphere(2, 16), n_quantiles=15)


def test_grid_layout(gaussian_grid):
    t = np.asarray(gaussian_grid.t_nodes)
    index = np.asarray(gaussian_grid.dir_index)
    for j in range(16):
        assert np.all(np.diff(t[index == j]) > 0)
    assert np.all(np.asarray(gaussian_grid.quad_weights) > 0)
    assert gaussian_grid.size == t.shape[0]


def test_widening_the_truncation_barely_moves_the_mean():
    ref = generate({"kind": "gaussian", "dim": 2}, 20_000, 8)
    dirs = grid_sphere(2, 16)
    expand = 0.1
    # a 20% longer range [lo - e * span, hi + e * span]
    wider = (1.2 * (1.0 + 2.0 * expand) - 1.0) / 2.0
    means = []
    for e in (expand, wider):
        grid = limits.build_cylinder_grid(ref, dirs, n_quantiles=30, expand=e)
        means.append(float(np.mean(np.asarray(limits.simulate_limit_one_sample(ref, grid, 500, 9).draws))))
    assert abs(means[1] - means[0]) < 0.01 * means[0]


def test_kernel_diagonal_and_symmetry(gaussian_ref, gaussian_grid):
    kernel = np.asarray(limits.covariance_kernel(gaussian_ref, gaussian_grid))
    F = np.asarray(limits.cdf_on_grid(gaussian_ref, gaussian_grid))
    np.testing.assert_allclose(np.diag(kernel), F * (1 - F), atol=1e-12)
    np.testing.assert_array_equal(kernel, kernel.T)
    assert np.linalg.eigvalsh(kernel).min() >= -1e-8


def test_kernel_on_the_line():
    ref = EmpiricalMeasure.create(np.arange(10.0))
    grid = limits.build_cylinder_grid(ref, grid_sphere(1, 2), n_quantiles=9)
    kernel = np.asarray(limits.covariance_kernel(ref, grid))
    F = np.asarray(limits.cdf_on_grid(ref, grid))
    plus = np.flatnonzero(np.asarray(grid.dir_index) == 1)
    t = np.asarray(grid.t_nodes)
    for i in plus:
        for j in plus:
            low = i if t[i] <= t[j] else j
            assert kernel[i, j] == pytest.approx(F[low] - F[i] * F[j], abs=1e-12)


def test_weighted_kernel_diagonal():
    rng = np.random.default_rng(1)
    ref = EmpiricalMeasure.create(rng.normal(size=(50, 2)), rng.dirichlet(np.ones(50)))
    grid = limits.build_cylinder_grid(ref, grid_sphere(2, 8), n_quantiles=10)
    kernel = np.asarray(limits.covariance_kernel(ref, grid))
    F = np.asarray(limits.cdf_on_grid(ref, grid))
    np.testing.assert_allclose(np.diag(kernel), F * (1 - F), atol=1e-12)


def test_point_mass_reference_is_degenerate():
    ref = EmpiricalMeasure.create([[1.0, -1.0]] * 5)
    grid = limits.build_cylinder_grid(ref, grid_sphere(2, 8), n_quantiles=5)
    np.testing.assert_allclose(np.asarray(limits.covariance_kernel(ref, grid)), 0.0, atol=1e-12)
    sample = limits.simulate_limit_one_sample(ref, grid, 20, 0)
    np.testing.assert_array_equal(np.asarray(sample.draws), np.zeros(20))


def test_one_sample_draws_are_nonnegative(gaussian_ref, gaussian_grid):
    sample = limits.simulate_limit_one_sample(gaussian_ref, gaussian_grid, 300, 1)
    assert sample.statistic_kind == limits.ONE_SAMPLE_L1
    assert sample.draws.shape == (300,)
    assert np.all(np.asarray(sample.draws) >= 0)
    assert float(np.mean(np.asarray(sample.draws))) > 0


def test_vs_nu_with_equal_measures_is_the_one_sample_law(gaussian_ref, gaussian_grid):
    one = limits.simulate_limit_one_sample(gaussian_ref, gaussian_grid, 100, 2)
    same = limits.simulate_limit_vs_nu(gaussian_ref, gaussian_ref, gaussian_grid, 100, 2)
    np.testing.assert_allclose(np.asarray(same.draws), np.asarray(one.draws), rtol=1e-12, atol=1e-15)


def test_vs_nu_with_ordered_cdfs_is_centered():
    mu = generate({"kind": "gaussian", "dim": 1}, 500, 3)
    nu = generate({"kind": "gaussian", "mean": [10.0]}, 500, 4)
    grid = limits.build_cylinder_grid([mu, nu], grid_sphere(1, 2), n_quantiles=30)
    # keep only the +1 direction, where F_mu >= F_nu everywhere
    keep = np.asarray(grid.dir_index) == 1
    grid = grid.replace(
        dir_index=grid.dir_index[keep], t_nodes=grid.t_nodes[keep], quad_weights=grid.quad_weights[keep]
    )
    sample = limits.simulate_limit_vs_nu(mu, nu, grid, 2000, 5)
    draws = np.asarray(sample.draws)
    assert abs(draws.mean()) <= 4 * draws.std(ddof=1) / math.sqrt(draws.shape[0])
    assert np.any(draws < 0)


def test_paired_law_of_identical_pairs_is_zero(gaussian_ref, gaussian_grid):
    sample = limits.simulate_limit_paired(gaussian_ref, gaussian_ref, gaussian_grid, 10, 6)
    np.testing.assert_array_equal(np.asarray(sample.draws), np.zeros(10))


def test_paired_law_needs_matching_samples(gaussian_ref, gaussian_grid):
    other = generate({"kind": "gaussian", "dim": 2}, 100, 7)
    with pytest.raises(InvalidParameterError):
        limits.simulate_limit_paired(gaussian_ref, other, gaussian_grid, 10, 0)


def test_split_functional():
    draws = np.array([[1.0, -2.0, 3.0]])
    signs = np.array([1.0, -1.0, 0.0])
    weights = np.array([1.0, 1.0, 0.5])
    np.testing.assert_allclose(np.asarray(limits.split_functional(draws, signs, weights)), [1.0 + 2.0 + 1.5])


def test_factorization_gives_up_on_indefinite_covariance():
    with pytest.raises(NumericalDegeneracyError):
        limits._factorize(-np.eye(3))


def test_empirical_point_mass_distribution_is_zero():
    spec = {"kind": "point_list", "points": [[1.0, 2.0]]}
    sample = limits.empirical_rootn_distribution(spec, limits.SW1_ONE_SAMPLE, 50, 5, 8, 0, ref_size=100)
    np.testing.assert_array_equal(np.asarray(sample.draws), np.zeros(5))


def test_empirical_distribution_is_reproducible_and_nonnegative():
    spec = {"kind": "gaussian", "dim": 2}
    kwargs = dict(n=200, reps=12, dirs_per_rep=16, seed=3, ref_size=5000)
    a = limits.empirical_rootn_distribution(spec, limits.SW1_ONE_SAMPLE, **kwargs)
    b = limits.empirical_rootn_distribution(spec, limits.SW1_ONE_SAMPLE, num_workers=3, **kwargs)
    np.testing.assert_array_equal(np.asarray(a.draws), np.asarray(b.draws))
    assert np.all(np.asarray(a.draws) > 0)
    m = limits.empirical_rootn_distribution(spec, limits.MSW1_ONE_SAMPLE, **kwargs)
    assert np.all(np.asarray(m.draws) >= np.asarray(a.draws) - 1e-12)


def test_msw1_statistic_climbs_past_the_shared_directions():
    # the only shared direction is orthogonal to the gap, where W_1 vanishes
    reference = EmpiricalMeasure.create([[0.0, 0.0], [0.0, 10.0]])
    sample = limits.empirical_rootn_distribution(
        {"kind": "point_list", "points": [[0.0, 0.0]]},
        limits.MSW1_ONE_SAMPLE,
        n=4,
        reps=3,
        dirs_per_rep=1,
        seed=0,
        reference=reference,
        dirs=DirectionSet.from_array([1.0, 0.0]),
    )
    np.testing.assert_allclose(np.asarray(sample.draws), np.full(3, 2.0 * 5.0), rtol=1e-12)


def test_empirical_vs_nu_needs_a_second_measure():
    with pytest.raises(InvalidParameterError):
        limits.empirical_rootn_distribution(
            {"kind": "gaussian", "dim": 1}, limits.SW1_VS_NU, 10, 2, 4, 0, ref_size=100
        )


def test_ks_distance():
    a = limits.LimitSample(draws=np.arange(10.0), statistic_kind="x")
    b = limits.LimitSample(draws=np.arange(10.0) + 100.0, statistic_kind="x")
    assert limits.ks_distance(a, a) == 0.0
    assert limits.ks_distance(a, b) == 1.0
    with pytest.raises(InvalidParameterError):
        limits.ks_distance(a, limits.LimitSample(draws=np.zeros(0), statistic_kind="x"))


def test_write_draws_csv(tmp_path):
    path = tmp_path / "draws.csv"
    limits.write_draws_csv(limits.LimitSample(draws=np.array([0.5, 1.5]), statistic_kind="sw1_one_sample"), str(path))
    assert path.read_text().splitlines() == ["replicate,sw1_one_sample", "0,0.5", "1,1.5"]


@pytest.mark.slow
def test_one_dimensional_limit_matches_the_empirical_law():
    spec = {"kind": "gaussian", "dim": 1}
    ref = generate(spec, 100_000, 0)
    grid = limits.build_cylinder_grid(ref, grid_sphere(1, 2), n_quantiles=200)
    limit = limits.simulate_limit_one_sample(ref, grid, 4000, 1)
    empirical = limits.empirical_rootn_distribution(
        spec, limits.SW1_ONE_SAMPLE, 1000, 4000, 1, 2, reference=ref, dirs=grid_sphere(1, 2)
    )
    assert limits.ks_distance(limit, empirical) <= 0.05
