import filecmp

import numpy as np
import pytest

from pnap import io
from pnap.discretization import Mesh
from pnap.physics import PhysicalConstants
from pnap.scenarios import builtin, run_simulation

C = PhysicalConstants(1.0, 1.0, 1.0)


def test_csv_1d(tmp_path):
    mesh = Mesh.uniform([(0, 1)], (4,))
    U = np.arange(12.0).reshape(3, 4) + 1
    T = np.full(4, 1.0 / 3.0)
    path = tmp_path / "a.csv"
    io.write_csv(path, mesh, U, T, C, "slab", all_moments=True)
    lines = path.read_text().splitlines()
    assert len(lines) == 5
    assert lines[0] == "x,I00,T,Trad,I_1,I_2"
    data = io.read_csv(path)
    assert data["T"][0] == 1.0 / 3.0  # full precision survives
    np.testing.assert_allclose(data["Trad"], U[0] ** 0.25)


def test_csv_2d_header_and_order(tmp_path):
    mesh = Mesh.uniform([(0, 1), (0, 2)], (2, 3))
    U = np.zeros((4,) + mesh.shape)
    U[0] = np.arange(6.0).reshape(2, 3)
    path = tmp_path / "b.csv"
    io.write_csv(path, mesh, U, np.ones(mesh.shape), C, "xz", all_moments=True)
    header = path.read_text().splitlines()[0]
    assert header == "x,z,I00,T,Trad,I_1_-1,I_1_0,I_1_1"
    data = io.read_csv(path)
    np.testing.assert_array_equal(data["I00"], np.arange(6.0))
    np.testing.assert_allclose(data["x"], [0.25] * 3 + [0.75] * 3)


def test_vtk_dimensions(tmp_path):
    mesh = Mesh.uniform([(0, 1), (0, 1)], (100, 100))
    U = np.random.default_rng(0).random((1, 100, 100))
    path = tmp_path / "c.vtk"
    io.write_vtk(path, mesh, U, np.ones((100, 100)), C)
    text = path.read_text()
    assert "DIMENSIONS 100 100 1" in text and "DATASET STRUCTURED_POINTS" in text
    back = io.read_vtk(path)
    # x varies fastest in the point ordering
    np.testing.assert_array_equal(back["I00"], U[0].ravel(order="F"))
    assert set(back) >= {"I00", "T", "Trad"}


def test_vtk_1d(tmp_path):
    mesh = Mesh.uniform([(0, 1)], (5,))
    path = tmp_path / "d.vtk"
    io.write_vtk(path, mesh, np.ones((2, 5)), np.ones(5), C)
    assert "DIMENSIONS 5 1 1" in path.read_text()


def test_rerun_byte_identical(tmp_path):
    s = builtin("ap_test").replace(cells=(16,), order=3, tmax=0.005)
    paths = []
    for k in range(2):
        res = run_simulation(s)
        d = tmp_path / str(k)
        d.mkdir()
        paths.append(io.write_snapshot(d, s.name, res.state.time, "csv", s.mesh(), res.state.moments,
                                       res.state.T, s.constants(), "slab"))
    assert filecmp.cmp(paths[0], paths[1], shallow=False)


def test_write_errors(tmp_path):
    mesh = Mesh.uniform([(0, 1)], (2,))
    with pytest.raises(OSError, match="nowhere"):
        io.write_csv(tmp_path / "nowhere" / "x.csv", mesh, np.ones((1, 2)), np.ones(2), C, "slab")
    with pytest.raises(ValueError):
        io.write_snapshot(tmp_path, "x", 0.0, "hdf5", mesh, np.ones((1, 2)), np.ones(2), C, "slab")
