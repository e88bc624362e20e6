"""PNG figures for the experiment commands."""

import numpy as np
import pytest

from src.analysis.convergence import fit_convergence
from src.mesh.build import build_disk_mesh
from src.plots import plot_convergence, plot_streamlines, plot_thickness_snapshots
from src.spaces.function_space import P2ScalarSpace, interpolate_scalar

PNG_MAGIC = b"\x89PNG"


@pytest.fixture(scope="module")
def disk():
    return build_disk_mesh(1.0, 0.3)


@pytest.mark.filterwarnings("error::UserWarning")
def test_thickness_snapshots_without_layout_warnings(tmp_path, disk):
    space = P2ScalarSpace(disk)
    snapshots = [(t, interpolate_scalar(space, lambda x, y, t=t: np.cos(t) * x))
                 for t in (0.0, 30.0, 60.0, 90.0)]
    path = plot_thickness_snapshots(disk, snapshots, tmp_path / "kelvin.png")
    assert path.read_bytes()[:4] == PNG_MAGIC


def test_odd_snapshot_count(tmp_path, disk):
    space = P2ScalarSpace(disk)
    snapshots = [(float(t), interpolate_scalar(space, lambda x, y: y)) for t in range(3)]
    assert plot_thickness_snapshots(disk, snapshots, tmp_path / "three.png").exists()


def test_streamlines_and_convergence(tmp_path, disk):
    psi = interpolate_scalar(P2ScalarSpace(disk), lambda x, y: 1 - x * x - y * y)
    assert plot_streamlines(disk, psi, tmp_path / "sub" / "psi.png").exists()

    rows = [{"edge_length": dx, "velocity_error": dx ** 2, "thickness_error": 3 * dx ** 2}
            for dx in (0.4, 0.2, 0.1)]
    path = plot_convergence(fit_convergence(rows), tmp_path / "conv.png")
    assert path.read_bytes()[:4] == PNG_MAGIC
