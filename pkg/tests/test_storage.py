"""VTK and CSV output."""

import numpy as np
import pytest

from src.errors import ConfigError
from src.mesh.build import build_disk_mesh
from src.spaces.function_space import (
    P1DGVectorSpace, P2ScalarSpace, interpolate_scalar, interpolate_vector,
)
from src.storage import (
    VTK_P2_ORDER, VTK_QUADRATIC_TRIANGLE, VTK_TRIANGLE, SnapshotWriter, dg_path,
    read_csv_timeseries, read_vtk, write_csv_timeseries, write_vtk,
)


@pytest.fixture
def disk():
    return build_disk_mesh(1.0, 0.5)


# --- VTK ---

def test_constant_scalar_field(tmp_path, disk):
    s = P2ScalarSpace(disk)
    h = interpolate_scalar(s, lambda x, y: 2.5)
    (path,) = write_vtk(disk, {"h": h}, tmp_path / "c.vtk")
    data = read_vtk(path)
    assert len(data["points"]) == s.n_dofs
    assert len(data["cells"]) == disk.n_triangles
    assert (data["cell_types"] == VTK_QUADRATIC_TRIANGLE).all()
    np.testing.assert_array_equal(data["point_data"]["h"], 2.5)


def test_p2_cell_order_is_vtk(tmp_path, disk):
    s = P2ScalarSpace(disk)
    (path,) = write_vtk(disk, {"h": interpolate_scalar(s, lambda x, y: x)}, tmp_path / "o.vtk")
    cells = np.array(read_vtk(path)["cells"])
    np.testing.assert_array_equal(cells, s.cell_dofs[:, VTK_P2_ORDER])
    # Entry 3 is the midpoint of corners 0 and 1
    pts = read_vtk(path)["points"][:, :2]
    np.testing.assert_allclose(pts[cells[:, 3]], 0.5 * (pts[cells[:, 0]] + pts[cells[:, 1]]), atol=1e-8)


def test_values_round_trip_to_nine_digits(tmp_path, disk):
    s = P2ScalarSpace(disk)
    h = interpolate_scalar(s, lambda x, y: np.exp(x) * np.sin(3 * y) + 1 / 3)
    (path,) = write_vtk(disk, {"h": h}, tmp_path / "r.vtk")
    np.testing.assert_allclose(read_vtk(path)["point_data"]["h"], h.coefficients, rtol=1e-8, atol=1e-9)


def test_vector_field_goes_to_dg_file(tmp_path, disk):
    v = P1DGVectorSpace(disk)
    u = interpolate_vector(v, lambda x, y: (-y, x))
    h = interpolate_scalar(P2ScalarSpace(disk), lambda x, y: x * y)
    paths = write_vtk(disk, {"h": h, "u": u}, tmp_path / "snap.vtk")
    assert paths == [tmp_path / "snap.vtk", tmp_path / "snap_dg.vtk"]
    data = read_vtk(paths[1])
    assert len(data["points"]) == 3 * disk.n_triangles
    assert (data["cell_types"] == VTK_TRIANGLE).all()
    vec = data["point_data"]["u"]
    np.testing.assert_allclose(vec[:, 0], -data["points"][:, 1], atol=1e-8)
    np.testing.assert_allclose(vec[:, 1], data["points"][:, 0], atol=1e-8)
    assert not vec[:, 2].any()


def test_vtk_is_deterministic(tmp_path, disk):
    h = interpolate_scalar(P2ScalarSpace(disk), lambda x, y: np.cos(x + y))
    (a,) = write_vtk(disk, {"h": h}, tmp_path / "a.vtk")
    (b,) = write_vtk(disk, {"h": h}, tmp_path / "b.vtk")
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()


def test_vtk_rejects_bad_input(tmp_path, disk):
    h = interpolate_scalar(P2ScalarSpace(disk), lambda x, y: x)
    with pytest.raises(ConfigError):
        write_vtk(disk, {"bad name": h}, tmp_path / "x.vtk")
    with pytest.raises(ConfigError):
        write_vtk(disk, {}, tmp_path / "x.vtk")
    other = build_disk_mesh(1.0, 0.5)
    with pytest.raises(ConfigError, match="different mesh"):
        write_vtk(other, {"h": h}, tmp_path / "x.vtk")


def test_dg_path():
    assert dg_path("out/balance.vtk").name == "balance_dg.vtk"
    assert dg_path("out/balance").name == "balance_dg.vtk"


def test_snapshot_writer(tmp_path, disk):
    h = interpolate_scalar(P2ScalarSpace(disk), lambda x, y: x)
    writer = SnapshotWriter(tmp_path, "kelvin")
    assert writer.next_path().name == "kelvin_00000.vtk"
    writer.write(disk, {"h": h}, 0.0)
    writer.write(disk, {"h": h}, 0.5)
    assert writer.next_path().name == "kelvin_00002.vtk"
    index = read_csv_timeseries(writer.write_index())
    assert [r["file"] for r in index] == ["kelvin_00000.vtk", "kelvin_00001.vtk"]
    assert [r["t"] for r in index] == [0.0, 0.5]


# --- CSV ---

def test_csv_header_only(tmp_path):
    path = write_csv_timeseries([], tmp_path / "empty.csv", columns=["t", "energy"])
    assert path.read_text() == "t,energy\n"
    assert read_csv_timeseries(path) == []
    with pytest.raises(ConfigError):
        write_csv_timeseries([], tmp_path / "x.csv")


def test_csv_exact_round_trip(tmp_path):
    rows = [{"step": 0, "t": 0.0, "energy": 1 / 3, "ok": True, "note": None},
            {"step": 1, "t": 0.1, "energy": np.float64(2 / 7), "ok": False, "note": "x"}]
    path = write_csv_timeseries(rows, tmp_path / "series.csv")
    lines = path.read_bytes().split(b"\n")
    assert lines[0] == b"step,t,energy,ok,note"
    assert lines[1] == b"0,0,0.33333333333333331,1,"
    back = read_csv_timeseries(path)
    assert back[0]["energy"] == 1 / 3
    assert back[1]["energy"] == 2 / 7
    assert back[1]["t"] == 0.1
    assert back[0]["note"] is None
    assert back[1]["note"] == "x"


def test_csv_column_subset(tmp_path):
    path = write_csv_timeseries([{"a": 1.5, "b": 2.0}], tmp_path / "s.csv", columns=["b"])
    assert path.read_text() == "b\n2\n"
