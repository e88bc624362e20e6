"""
Output layer for swe-femlab.

All files an experiment produces go through this module:
  - VTK legacy ASCII (UNSTRUCTURED_GRID) for fields
  - CSV for diagnostics time series, spectra and convergence tables

Path convention (under the experiment's output directory):
  {series}_{index:05d}.vtk       P2 scalars on quadratic triangles (cell type 22)
  {series}_{index:05d}_dg.vtk    P1DG vectors on a disconnected P1 sub-mesh
  {name}.csv                     diagnostics, 17 significant digits

Formatting is fixed (%.9g in VTK, %.17g in CSV, LF line endings) so identical
inputs give byte-identical files. Nothing here mutates a mesh or field.
"""

import csv
from pathlib import Path

import numpy as np
import structlog

from src.errors import ConfigError
from src.mesh.mesh import Mesh
from src.spaces.function_space import Field

logger = structlog.get_logger("storage")

VTK_TRIANGLE = 5
VTK_QUADRATIC_TRIANGLE = 22
# VTK wants corners then midpoints of (0,1), (1,2), (2,0); locally those are 5, 3, 4
VTK_P2_ORDER = [0, 1, 2, 5, 3, 4]

VTK_FORMAT = "%.9g"
CSV_FORMAT = ".17g"


def _fmt(values: np.ndarray) -> list[str]:
    return [" ".join(VTK_FORMAT % v for v in row) for row in np.atleast_2d(values)]


def _header(title: str) -> list[str]:
    return ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]


def _check_field_name(name: str) -> None:
    if not name or any(c.isspace() for c in name):
        raise ConfigError(f"VTK field names cannot be empty or contain spaces: '{name}'")


def _write_lines(path: Path, lines: list[str]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        logger.error("write_failed", path=str(path), error=str(e))
        raise ConfigError(f"cannot write {path}: {e}") from e


def _p2_lines(mesh: Mesh, fields: dict[str, Field], title: str) -> list[str]:
    space = next(iter(fields.values())).space
    coords = space.node_coords
    n = len(coords)
    m = mesh.n_triangles
    lines = _header(title)
    lines.append(f"POINTS {n} double")
    lines.extend(_fmt(np.column_stack([coords, np.zeros(n)])))
    lines.append(f"CELLS {m} {7 * m}")
    cells = space.cell_dofs[:, VTK_P2_ORDER]
    lines.extend("6 " + " ".join(map(str, row)) for row in cells)
    lines.append(f"CELL_TYPES {m}")
    lines.extend([str(VTK_QUADRATIC_TRIANGLE)] * m)
    lines.append(f"POINT_DATA {n}")
    for name, fld in fields.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(VTK_FORMAT % v for v in fld.coefficients)
    return lines


def _dg_lines(mesh: Mesh, fields: dict[str, Field], title: str) -> list[str]:
    m = mesh.n_triangles
    n = 3 * m
    coords = mesh.corners.reshape(-1, 2)
    lines = _header(title)
    lines.append(f"POINTS {n} double")
    lines.extend(_fmt(np.column_stack([coords, np.zeros(n)])))
    lines.append(f"CELLS {m} {4 * m}")
    lines.extend(f"3 {3 * e} {3 * e + 1} {3 * e + 2}" for e in range(m))
    lines.append(f"CELL_TYPES {m}")
    lines.extend([str(VTK_TRIANGLE)] * m)
    lines.append(f"POINT_DATA {n}")
    for name, fld in fields.items():
        comps = fld.space.components(fld.coefficients)          # (m, 2, 3)
        nodal = np.swapaxes(comps, 1, 2).reshape(-1, 2)          # (3m, 2)
        lines.append(f"VECTORS {name} double")
        lines.extend(_fmt(np.column_stack([nodal, np.zeros(n)])))
    return lines


def dg_path(path: str | Path) -> Path:
    """Sibling file that holds the P1DG vector fields of `path`."""
    path = Path(path)
    return path.with_name(f"{path.stem}_dg{path.suffix or '.vtk'}")


def write_vtk(mesh: Mesh, fields: dict[str, Field], path: str | Path,
              title: str = "swe-femlab") -> list[Path]:
    """
    Write named fields as VTK legacy ASCII.

    Scalar (P2) fields go to `path`; vector (P1DG) fields go to the sibling
    `<stem>_dg.vtk` with each element's nodes duplicated so discontinuities
    survive. Returns the paths written, scalar file first.
    """
    path = Path(path)
    scalars, vectors = {}, {}
    for name, fld in fields.items():
        _check_field_name(name)
        if fld.space.mesh is not mesh:
            raise ConfigError(f"field '{name}' lives on a different mesh")
        (vectors if fld.is_vector else scalars)[name] = fld
    if not fields:
        raise ConfigError("write_vtk needs at least one field")

    written = []
    if scalars:
        _write_lines(path, _p2_lines(mesh, scalars, title))
        written.append(path)
    if vectors:
        target = dg_path(path)
        _write_lines(target, _dg_lines(mesh, vectors, title))
        written.append(target)
    logger.debug("vtk_written", paths=[str(p) for p in written], fields=sorted(fields))
    return written


def read_vtk(path: str | Path) -> dict:
    """
    Parse a file written by write_vtk.

    Returns {"points": (n, 3), "cells": list of index lists, "cell_types": (m,),
    "point_data": {name: (n,) or (n, 3)}}.
    """
    path = Path(path)
    tokens = path.read_text().split("\n")
    out = {"points": None, "cells": [], "cell_types": None, "point_data": {}}
    i = 4
    while i < len(tokens):
        parts = tokens[i].split()
        i += 1
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            out["points"] = np.array([[float(v) for v in tokens[i + k].split()] for k in range(n)])
            i += n
        elif key == "CELLS":
            m = int(parts[1])
            out["cells"] = [[int(v) for v in tokens[i + k].split()[1:]] for k in range(m)]
            i += m
        elif key == "CELL_TYPES":
            m = int(parts[1])
            out["cell_types"] = np.array([int(tokens[i + k]) for k in range(m)])
            i += m
        elif key == "POINT_DATA":
            n_points = int(parts[1])
        elif key == "SCALARS":
            i += 1      # LOOKUP_TABLE
            out["point_data"][parts[1]] = np.array([float(tokens[i + k]) for k in range(n_points)])
            i += n_points
        elif key == "VECTORS":
            out["point_data"][parts[1]] = np.array(
                [[float(v) for v in tokens[i + k].split()] for k in range(n_points)])
            i += n_points
    return out


class SnapshotWriter:
    """Numbered VTK snapshots of one series in an output directory."""

    def __init__(self, output_dir: str | Path, series: str, width: int = 5):
        self.output_dir = Path(output_dir)
        self.series = series
        self.width = width
        self.counter = 0
        self.index: list[dict] = []

    def next_path(self) -> Path:
        return self.output_dir / f"{self.series}_{self.counter:0{self.width}d}.vtk"

    def write(self, mesh: Mesh, fields: dict[str, Field], t: float) -> list[Path]:
        paths = write_vtk(mesh, fields, self.next_path(), title=f"{self.series} t={t:.9g}")
        self.index.append({"index": self.counter, "t": t, "file": paths[0].name})
        self.counter += 1
        return paths

    def write_index(self) -> Path:
        """CSV listing snapshot number, time and file name."""
        return write_csv_timeseries(self.index, self.output_dir / f"{self.series}_snapshots.csv",
                                    columns=["index", "t", "file"])


# --- CSV ---

def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), CSV_FORMAT)
    return str(value)


def write_csv_timeseries(rows: list[dict], path: str | Path,
                         columns: list[str] | None = None) -> Path:
    """Header plus one line per row. Columns default to the first row's keys."""
    path = Path(path)
    if columns is None:
        if not rows:
            raise ConfigError("an empty series needs explicit columns")
        columns = list(rows[0])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_csv_value(row.get(c)) for c in columns])
    except OSError as e:
        logger.error("write_failed", path=str(path), error=str(e))
        raise ConfigError(f"cannot write {path}: {e}") from e
    logger.debug("csv_written", path=str(path), rows=len(rows))
    return path


def read_csv_timeseries(path: str | Path) -> list[dict]:
    """Rows as dicts; numeric cells become floats, empty cells None."""
    rows = []
    with open(path, newline="") as f:
        for raw in csv.DictReader(f):
            row = {}
            for key, value in raw.items():
                if value == "":
                    row[key] = None
                    continue
                try:
                    row[key] = float(value)
                except ValueError:
                    row[key] = value
            rows.append(row)
    return rows
