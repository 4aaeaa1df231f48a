import math

import numpy as np
import pytest

from jaxsw.common.errors import CsvParseError, InvalidParameterError
from jaxsw.data.csv_io import read_measure_csv, write_measure_csv
from jaxsw.data.generators import generate
from jaxsw.data.measures import EmpiricalMeasure


def test_single_point_list_gives_a_point_mass():
    m = generate({"kind": "point_list", "points": [[0.0, 0.0]]}, 1, 0)
    assert (m.n, m.d) == (1, 2)
    np.testing.assert_array_equal(np.asarray(m.points), [[0.0, 0.0]])
    np.testing.assert_array_equal(np.asarray(m.weights), [1.0])


def test_point_list_draws_only_listed_points():
    points = [[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]
    m = generate({"kind": "point_list", "points": points}, 200, 3)
    drawn = {tuple(row) for row in np.asarray(m.points).tolist()}
    assert drawn <= {tuple(p) for p in points}


def test_generation_is_a_function_of_spec_n_and_seed():
    spec = {"kind": "gaussian", "dim": 3}
    a, b = generate(spec, 50, 7), generate(spec, 50, 7)
    np.testing.assert_array_equal(np.asarray(a.points), np.asarray(b.points))
    c = generate(spec, 50, 8)
    assert not np.array_equal(np.asarray(a.points), np.asarray(c.points))


def test_gaussian_mean_norm():
    m = generate({"kind": "gaussian", "mean": [0.0, 0.0]}, 10_000, 11)
    norms = np.linalg.norm(np.asarray(m.points), axis=-1)
    se = norms.std(ddof=1) / math.sqrt(norms.shape[0])
    assert abs(norms.mean() - math.sqrt(math.pi / 2)) <= 4 * se


def test_uniform_cube_stays_inside():
    m = generate({"kind": "uniform_cube", "dim": 2, "side": 2.0}, 1000, 5)
    assert np.all(np.abs(np.asarray(m.points)) <= 1.0)


def test_student_t_shape():
    m = generate({"kind": "student_t", "dim": 4, "df": 3.0}, 100, 2)
    assert (m.n, m.d) == (100, 4)


@pytest.mark.parametrize(
    "spec, n",
    [
        ({"kind": "cauchy", "dim": 2}, 10),
        ({"kind": "gaussian", "dim": 2}, 0),
        ({"kind": "gaussian", "dim": 2, "variance": -1.0}, 10),
        ({"kind": "gaussian"}, 10),
        ({"kind": "uniform_cube", "dim": 2, "width": 1.0}, 10),
    ],
)
def test_generate_rejects_bad_specs(spec, n):
    with pytest.raises(InvalidParameterError):
        generate(spec, n, 0)


def test_csv_without_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("1,2\n3,4\n")
    m = read_measure_csv(str(path))
    np.testing.assert_array_equal(np.asarray(m.points), [[1.0, 2.0], [3.0, 4.0]])
    assert m.is_uniform


def test_csv_with_header_and_weights(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("x,weight\n0,0.25\n1,0.75\n")
    m = read_measure_csv(str(path))
    assert m.d == 1
    np.testing.assert_allclose(np.asarray(m.weights), [0.25, 0.75])


def test_csv_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,x\n")
    with pytest.raises(CsvParseError) as info:
        read_measure_csv(str(path))
    assert (info.value.line, info.value.column) == (2, 2)


@pytest.mark.parametrize("cell", ["inf", "nan", "-Infinity"])
def test_csv_reports_non_finite_cells(tmp_path, cell):
    path = tmp_path / "bad.csv"
    path.write_text(f"x,y\n1,2\n3,4\n5,{cell}\n")
    with pytest.raises(CsvParseError) as info:
        read_measure_csv(str(path))
    assert (info.value.line, info.value.column) == (4, 2)


def test_csv_rejects_ragged_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(CsvParseError) as info:
        read_measure_csv(str(path))
    assert info.value.line == 2


def test_csv_rejects_weights_not_summing_to_one(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,weight\n0,0.5\n1,0.6\n")
    with pytest.raises(CsvParseError):
        read_measure_csv(str(path))


def test_csv_write_then_read_keeps_weights(tmp_path):
    path = tmp_path / "m.csv"
    m = EmpiricalMeasure.create([[0.5, -1.0], [2.0, 3.25]], [0.125, 0.875])
    write_measure_csv(m, str(path))
    back = read_measure_csv(str(path))
    np.testing.assert_array_equal(np.asarray(back.points), np.asarray(m.points))
    np.testing.assert_array_equal(np.asarray(back.weights), np.asarray(m.weights))
