import numpy as np
import pytest

from spinfork.geometry import MeshSpec
from spinfork.ovf import read_snapshot_ovf, write_snapshot_ovf


def test_two_cell_plus_x_rows(tmp_path):
    mesh = MeshSpec(nx=2, ny=1, nz=1)
    m = np.zeros((3, 2, 1))
    m[0] = 1.0
    path = tmp_path / "two.ovf"
    write_snapshot_ovf(m, mesh, 0.0, path)
    data_rows = [ln for ln in path.read_text().splitlines()
                 if ln and not ln.startswith("#")]
    assert data_rows == ["1 0 0", "1 0 0"]


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(11)
    mesh = MeshSpec(nx=7, ny=5, nz=1)
    m = rng.normal(size=(3, 7, 5))
    m /= np.linalg.norm(m, axis=0)
    path = tmp_path / "rt.ovf"
    write_snapshot_ovf(m, mesh, 1.25e-9, path)
    m2, mesh2, t2 = read_snapshot_ovf(path)
    assert np.array_equal(m, m2)
    assert mesh2.nx == 7 and mesh2.ny == 5
    assert mesh2.dx == pytest.approx(mesh.dx)
    assert t2 == 1.25e-9


def test_snapshot_time_metadata(tmp_path):
    mesh = MeshSpec(nx=2, ny=2, nz=1)
    m = np.zeros((3, 2, 2))
    m[2] = 1.0
    path = tmp_path / "t.ovf"
    write_snapshot_ovf(m, mesh, 8e-10, path)
    assert "Total simulation time: 8e-10 s" in path.read_text()
    _, _, t = read_snapshot_ovf(path)
    assert t == 8e-10


def test_shape_mismatch_rejected(tmp_path):
    mesh = MeshSpec(nx=3, ny=3, nz=1)
    with pytest.raises(ValueError):
        write_snapshot_ovf(np.zeros((3, 2, 2)), mesh, 0.0,
                           tmp_path / "bad.ovf")


def test_reader_rejects_malformed(tmp_path):
    p = tmp_path / "bad.ovf"
    p.write_text("# OOMMF OVF 2.0\n# xnodes: 2\n")
    with pytest.raises(ValueError):
        read_snapshot_ovf(p)
