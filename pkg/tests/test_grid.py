import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spmlab.grid import (Field, PeriodicGrid, Trajectory, field_from_bytes, field_from_csv,
                         field_to_bytes, field_to_csv, l1_path_distance, laplacian_of_A, lp_norm,
                         read_field, read_trajectory, write_field, write_trajectory)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_grid_geometry():
    g = PeriodicGrid(2, 8)
    assert g.size == 64 and g.shape == (8, 8)
    assert g.dx == 1 / 8
    c = g.centers()
    assert c.shape == (8, 8, 2)
    np.testing.assert_allclose(c[0, 0], [1 / 16, 1 / 16])
    assert g.neighbor(7, step=1) == 0
    assert g.neighbor(0, step=-1) == 7


@pytest.mark.parametrize("bad", [(3, 8), (1, 0)])
def test_grid_rejects(bad):
    with pytest.raises(ValueError):
        PeriodicGrid(*bad)


def test_field_rejects_nonfinite():
    g = PeriodicGrid(1, 4)
    with pytest.raises(ValueError):
        Field(g, [0, 1, np.nan, 2])
    with pytest.raises(ValueError):
        Field(g, [0, 1, 2])


def test_laplacian_constant_is_zero():
    f = Field.constant(PeriodicGrid(2, 16), 3.7)
    assert np.all(laplacian_of_A(f, lambda u: np.abs(u) * u).values == 0.0)


def test_laplacian_sine_second_order():
    errs = []
    for M in (128, 256, 512):
        g = PeriodicGrid(1, M)
        f = Field.from_function(g, lambda x: np.sin(2 * np.pi * x[..., 0]))
        exact = -(2 * np.pi) ** 2 * f.values
        errs.append(np.max(np.abs(laplacian_of_A(f, lambda u: u).values - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.02)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(3, 64), elements=finite))
def test_laplacian_conserves_mass(v):
    f = Field(PeriodicGrid(1, v.size), v)
    out = laplacian_of_A(f, lambda u: np.abs(u) * u)
    scale = np.sum(np.abs(out.values)) + 1e-300
    assert abs(np.sum(out.values)) <= 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 6), elements=finite))
def test_laplacian_conserves_mass_2d(v):
    out = laplacian_of_A(Field(PeriodicGrid(2, 6), v), lambda u: u ** 3)
    assert abs(np.sum(out.values)) <= 1e-12 * (np.sum(np.abs(out.values)) + 1e-300)


def test_lp_norm_examples():
    g = PeriodicGrid(1, 256)
    assert lp_norm(Field.constant(g, 0.0), 3) == 0.0
    for p in (1, 2, 3.5, np.inf):
        assert lp_norm(Field.constant(g, -2.5), p) == pytest.approx(2.5, rel=1e-14)
    s = Field.from_function(g, lambda x: np.sin(2 * np.pi * x[..., 0]))
    assert abs(lp_norm(s, 1) - 2 / np.pi) <= 1e-3
    with pytest.raises(ValueError):
        lp_norm(s, 0.5)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 50), elements=finite), st.floats(1.0, 8.0))
def test_holder_on_unit_torus(v, p):
    f = Field(PeriodicGrid(1, v.size), v)
    assert lp_norm(f, 1) <= lp_norm(f, p) * (1 + 1e-12) + 1e-300


def _traj(grid, values, dt=0.1):
    values = np.asarray(values, float)
    return Trajectory(grid, dt * np.arange(values.shape[0]), values)


def test_path_distance_examples(rng):
    g = PeriodicGrid(1, 16)
    a = _traj(g, rng.normal(size=(11, 16)))
    assert l1_path_distance(a, a) == 0.0
    b = _traj(g, a.values + 0.3)
    assert l1_path_distance(a, b) == pytest.approx(0.3 * 1.0, rel=1e-12)
    with pytest.raises(ValueError):
        l1_path_distance(a, _traj(PeriodicGrid(1, 8), np.zeros((11, 8))))
    with pytest.raises(ValueError):
        l1_path_distance(a, _traj(g, a.values, dt=0.2))


def test_trajectory_requires_increasing_times():
    g = PeriodicGrid(1, 4)
    with pytest.raises(ValueError):
        Trajectory(g, [0.0, 0.2, 0.1], np.zeros((3, 4)))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([1, 2]), st.integers(3, 9), st.data())
def test_field_serialization_roundtrip(dim, M, data):
    g = PeriodicGrid(dim, M)
    v = data.draw(arrays(np.float64, g.shape, elements=st.floats(allow_nan=False,
                                                                  allow_infinity=False)))
    f = Field(g, v)
    for back in (field_from_csv(field_to_csv(f)), field_from_bytes(field_to_bytes(f))):
        assert back.grid == g
        assert np.array_equal(back.values, f.values)


def test_field_file_layout(tmp_path):
    f = Field(PeriodicGrid(2, 3), np.arange(9.0).reshape(3, 3))
    write_field(tmp_path / "f.csv", f)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "dim,cells_per_dim" and lines[1] == "2,3"
    assert [float(s) for s in lines[2:]] == list(range(9))  # row-major
    write_field(tmp_path / "f.bin", f)
    assert np.array_equal(read_field(tmp_path / "f.bin").values, f.values)
    assert not list(tmp_path.glob("*.tmp*"))


def test_trajectory_roundtrip(tmp_path, rng):
    g = PeriodicGrid(1, 8)
    t = Trajectory(g, [0.0, 0.5, 1.0], rng.normal(size=(3, 8)), {"mass": [1.0, 2.0, 3.0]})
    write_trajectory(tmp_path / "tr", t)
    back = read_trajectory(tmp_path / "tr")
    assert np.array_equal(back.values, t.values)
    assert np.array_equal(back.times, t.times)
    assert back.diagnostics["mass"] == [1.0, 2.0, 3.0]
