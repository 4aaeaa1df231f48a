import math

import chex
import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from jaxsw.common.errors import InvalidParameterError, UnsupportedDimensionError
from jaxsw.data.measures import EmpiricalMeasure, moment_p
from jaxsw.transport.ot1d import w1_1d
from jaxsw.transport.projections import (
    GAUSSIAN,
    GRID,
    UNIFORM_SPHERE,
    grid_sphere,
    project,
    project_measure,
    sample_gaussian_dirs,
    sample_sphere,
)


def exact_w1(xs, ys):
    cost = cdist(xs, ys)
    rows, cols = linear_sum_assignment(cost)
    return cost[rows, cols].mean()


def test_sphere_directions_are_unit_vectors():
    dirs = sample_sphere(5, 100, 0)
    assert dirs.kind == UNIFORM_SPHERE
    np.testing.assert_allclose(np.linalg.norm(np.asarray(dirs.dirs), axis=-1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.asarray(dirs.quad_weights), 0.01)


def test_sphere_in_one_dimension_is_plus_minus_one():
    dirs = np.asarray(sample_sphere(1, 50, 3).dirs).reshape(-1)
    np.testing.assert_allclose(np.abs(dirs), 1.0, atol=1e-15)


def test_sphere_first_coordinate_moment():
    theta = np.asarray(sample_sphere(3, 100_000, 1).dirs)[:, 0]
    se = np.abs(theta).std(ddof=1) / math.sqrt(theta.shape[0])
    assert abs(np.abs(theta).mean() - 0.5) <= 4 * se


def test_sphere_sampling_is_reproducible():
    a, b = sample_sphere(4, 10, 9), sample_sphere(4, 10, 9)
    np.testing.assert_array_equal(np.asarray(a.dirs), np.asarray(b.dirs))


def test_gaussian_directions_have_the_requested_variance():
    d = 4
    dirs = sample_gaussian_dirs(d, 20_000, 1.0 / d, 2)
    assert dirs.kind == GAUSSIAN and dirs.scale == pytest.approx(0.25)
    sq_norms = np.sum(np.asarray(dirs.dirs) ** 2, axis=-1)
    se = sq_norms.std(ddof=1) / math.sqrt(sq_norms.shape[0])
    assert abs(sq_norms.mean() - 1.0) <= 4 * se


def test_gaussian_directions_reject_nonpositive_variance():
    with pytest.raises(InvalidParameterError):
        sample_gaussian_dirs(2, 10, 0.0, 0)


def test_grids():
    assert grid_sphere(1, 7).k == 2
    circle = grid_sphere(2, 4)
    assert circle.kind == GRID
    np.testing.assert_allclose(
        np.asarray(circle.dirs), [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], atol=1e-15
    )
    sphere = np.asarray(grid_sphere(3, 200).dirs)
    np.testing.assert_allclose(np.linalg.norm(sphere, axis=-1), 1.0, atol=1e-12)


def test_circle_grid_quadrature():
    grid = grid_sphere(2, 360)
    value = float(np.asarray(grid.quad_weights) @ np.abs(np.asarray(grid.dirs)[:, 0]))
    assert value == pytest.approx(2.0 / math.pi, abs=1e-4)


def test_grid_beyond_three_dimensions_is_unsupported():
    with pytest.raises(UnsupportedDimensionError):
        grid_sphere(4, 100)


def test_project_onto_a_coordinate():
    m = EmpiricalMeasure.create([[1.0, 5.0], [3.0, -2.0], [2.0, 0.0]])
    a = project(m, [1.0, 0.0])
    np.testing.assert_array_equal(np.asarray(a.values), [1.0, 2.0, 3.0])


def test_project_point_mass():
    a = project(EmpiricalMeasure.create([[3.0, 4.0]]), [0.6, 0.8])
    np.testing.assert_allclose(np.asarray(a.values), [5.0])
    np.testing.assert_array_equal(np.asarray(a.cumweights), [1.0])


def test_project_rejects_dimension_mismatch():
    with pytest.raises(InvalidParameterError):
        project(EmpiricalMeasure.create([[1.0, 2.0]]), [1.0, 0.0, 0.0])


def test_batched_projection_matches_single_projection():
    rng = np.random.default_rng(0)
    m = EmpiricalMeasure.create(rng.normal(size=(20, 3)))
    dirs = sample_sphere(3, 5, 4)
    values, cumweights = project_measure(m, dirs)
    chex.assert_shape([values, cumweights], (5, 20))
    for j in range(dirs.k):
        single = project(m, dirs.dirs[j])
        np.testing.assert_allclose(np.asarray(values[j]), np.asarray(single.values), atol=1e-14)
        np.testing.assert_allclose(np.asarray(cumweights[j])[-1], 1.0, atol=1e-12)


def test_projection_is_contractive():
    rng = np.random.default_rng(1)
    for _ in range(10):
        xs, ys = rng.normal(size=(5, 3)), rng.normal(size=(5, 3)) + 0.5
        mu, nu = EmpiricalMeasure.create(xs), EmpiricalMeasure.create(ys)
        bound = exact_w1(xs, ys)
        for theta in np.asarray(sample_sphere(3, 20, int(rng.integers(1 << 30))).dirs):
            assert w1_1d(project(mu, theta), project(nu, theta)) <= bound + 1e-12


def test_projected_w1_is_lipschitz_in_the_direction():
    rng = np.random.default_rng(2)
    mu = EmpiricalMeasure.create(rng.normal(size=(15, 2)))
    nu = EmpiricalMeasure.create(rng.normal(size=(11, 2)) * 2.0)
    constant = moment_p(mu, 1.0) + moment_p(nu, 1.0)
    dirs = np.asarray(sample_sphere(2, 30, 5).dirs)
    values = [w1_1d(project(mu, t), project(nu, t)) for t in dirs]
    for i in range(len(dirs)):
        for j in range(len(dirs)):
            gap = np.linalg.norm(dirs[i] - dirs[j])
            assert abs(values[i] - values[j]) <= constant * gap + 1e-12
