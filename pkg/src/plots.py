"""
Figures for the experiment commands (PNG, matplotlib Agg backend).

P2 fields are drawn on the uniformly refined mesh: its vertex numbering
(old vertices, then one per edge midpoint) is exactly the P2 dof order, so
coefficients are nodal values of a linear triangulation 4x finer.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import matplotlib.tri as mtri
import numpy as np
import structlog

from src.analysis.convergence import ConvergenceTable
from src.mesh.build import refine_uniform
from src.mesh.mesh import Mesh
from src.spaces.function_space import Field

logger = structlog.get_logger("plots")

DPI = 120


def _p2_triangulation(mesh: Mesh) -> mtri.Triangulation:
    fine = refine_uniform(mesh)
    return mtri.Triangulation(fine.vertices[:, 0], fine.vertices[:, 1], fine.triangles)


def _save(fig, path: str | Path, tight: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if tight:
        fig.tight_layout()
    fig.savefig(path, format="png", dpi=DPI)
    plt.close(fig)
    logger.debug("figure_written", path=str(path))
    return path


def plot_thickness_snapshots(mesh: Mesh, snapshots: list[tuple[float, Field]],
                             path: str | Path, levels: int = 21) -> Path:
    """One filled-contour panel of h per snapshot, shared colour scale."""
    tri = _p2_triangulation(mesh)
    vmax = max(float(np.abs(h.coefficients).max()) for _, h in snapshots) or 1.0
    contour_levels = np.linspace(-vmax, vmax, levels)

    n = len(snapshots)
    cols = min(n, 2)
    rows = int(np.ceil(n / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(5 * cols, 4.5 * rows), squeeze=False,
                             layout="constrained")
    for ax, (t, h) in zip(axes.ravel(), snapshots):
        cs = ax.tricontourf(tri, h.coefficients, levels=contour_levels, cmap="RdBu_r")
        ax.set_title(f"t = {t:g}")
        ax.set_aspect("equal")
    for ax in axes.ravel()[n:]:
        ax.axis("off")
    fig.colorbar(cs, ax=axes.ravel().tolist(), shrink=0.8, label="h")
    return _save(fig, path, tight=False)


def plot_streamlines(mesh: Mesh, psi: Field, path: str | Path, levels: int = 15) -> Path:
    """Streamlines of the balanced flow are the contours of psi."""
    tri = _p2_triangulation(mesh)
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.triplot(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles,
               color="#bdbdbd", linewidth=0.4)
    ax.tricontour(tri, psi.coefficients, levels=levels, colors="#1565c0", linewidths=1.0)
    ax.set_aspect("equal")
    ax.set_title("Balanced streamlines (contours of psi)")
    return _save(fig, path)


def plot_convergence(table: ConvergenceTable, path: str | Path) -> Path:
    """log-log errors against edge length with the fitted lines."""
    dx = table.edge_lengths
    fig, ax = plt.subplots(figsize=(6, 5))
    markers = {"velocity": "o", "thickness": "s"}
    for name, err in table.errors.items():
        ax.loglog(dx, err, markers.get(name, "^") + "-", label=f"{name} (slope {table.slopes[name]:.2f})")
        fit = np.exp(table.intercepts[name]) * dx ** table.slopes[name]
        ax.loglog(dx, fit, "--", color="#757575", linewidth=1)
    ax.set_xlabel("edge length")
    ax.set_ylabel("L2 error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="upper left", fontsize=9)
    return _save(fig, path)
