"""
Mesh file import/export.

Formats:
  - gmsh22-ascii: Gmsh MSH 2.2 ASCII. Nodes plus 3-node triangles (type 2);
    2-node lines (type 1) are taken as the declared boundary; other element
    types are skipped with a warning. When any line elements are present,
    every boundary edge must be one of them (tag all boundary curves as
    physical groups); an undeclared boundary edge is read as a hole.
    A file without line elements takes the topological boundary.
  - triangle-node-ele: Triangle's .node/.ele pair. 0- or 1-based numbering is
    detected from the first vertex id in the .node file.

Clockwise triangles are reoriented, vertices no triangle uses are dropped
(both with a warning), then the mesh is validated. Parse errors carry the
file path and 1-based line number.
"""

from pathlib import Path

import numpy as np
import structlog

from src.errors import ConfigError, MeshFormatError
from src.mesh.mesh import Mesh, validate

logger = structlog.get_logger("mesh.reader")

GMSH_LINE = 1
GMSH_TRIANGLE = 2

FORMATS = ("gmsh22-ascii", "triangle-node-ele")


class _Lines:
    """Line cursor that remembers where it is, for error messages."""

    def __init__(self, path: Path):
        self.path = path
        self.lines = path.read_text().splitlines()
        self.pos = 0

    @property
    def line_number(self) -> int:
        return self.pos  # 1-based number of the line last returned

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise MeshFormatError("unexpected end of file", str(self.path), self.pos)
        line = self.lines[self.pos]
        self.pos += 1
        return line.strip()

    def error(self, message: str) -> MeshFormatError:
        return MeshFormatError(message, str(self.path), self.line_number)

    def ints(self, line: str) -> list[int]:
        try:
            return [int(tok) for tok in line.split()]
        except ValueError:
            raise self.error(f"expected integers, got '{line}'") from None

    def floats(self, line: str) -> list[float]:
        try:
            return [float(tok) for tok in line.split()]
        except ValueError:
            raise self.error(f"expected numbers, got '{line}'") from None


def _finalize(vertices: np.ndarray, triangles: np.ndarray,
              declared_boundary: np.ndarray | None, source: str) -> Mesh:
    """Compact unused vertices, fix orientation, validate."""
    if len(triangles) == 0:
        raise MeshFormatError("no triangles found", source)

    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    if not used.all():
        logger.warning("unreferenced_vertices_dropped", path=source, count=int((~used).sum()))
        new_ids = np.cumsum(used) - 1
        vertices = vertices[used]
        triangles = new_ids[triangles]
        if declared_boundary is not None and len(declared_boundary):
            keep = used[declared_boundary].all(axis=1)
            declared_boundary = new_ids[declared_boundary[keep]]

    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    cw = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) < 0
    if cw.any():
        logger.warning("clockwise_triangles_reoriented", path=source, count=int(cw.sum()))
        triangles = triangles.copy()
        triangles[cw, 1], triangles[cw, 2] = triangles[cw, 2].copy(), triangles[cw, 1].copy()

    mesh = Mesh(vertices=vertices, triangles=triangles)
    validate(mesh, declared_boundary=declared_boundary)
    logger.info("mesh_loaded", path=source, n_vertices=mesh.n_vertices,
                n_triangles=mesh.n_triangles)
    return mesh


def _read_gmsh22(path: Path) -> Mesh:
    cur = _Lines(path)
    node_ids: dict[int, int] = {}
    coords: list[list[float]] = []
    triangles: list[list[int]] = []
    lines: list[list[int]] = []
    skipped: dict[int, int] = {}
    seen_format = False

    while cur.pos < len(cur.lines):
        line = cur.next()
        if not line:
            continue

        if line == "$MeshFormat":
            parts = cur.next().split()
            if len(parts) < 2:
                raise cur.error("malformed $MeshFormat header")
            if not parts[0].startswith("2"):
                raise cur.error(f"unsupported MSH version {parts[0]} (need 2.2)")
            if parts[1] != "0":
                raise cur.error("binary MSH files are not supported")
            if cur.next() != "$EndMeshFormat":
                raise cur.error("expected $EndMeshFormat")
            seen_format = True

        elif line == "$Nodes":
            count = cur.ints(cur.next())
            if len(count) != 1:
                raise cur.error("expected node count")
            for _ in range(count[0]):
                row = cur.next()
                values = cur.floats(row)
                if len(values) < 3:
                    raise cur.error(f"node line needs id x y [z], got '{row}'")
                node_ids[int(values[0])] = len(coords)
                coords.append(values[1:3])
            if cur.next() != "$EndNodes":
                raise cur.error("expected $EndNodes")

        elif line == "$Elements":
            count = cur.ints(cur.next())
            if len(count) != 1:
                raise cur.error("expected element count")
            for _ in range(count[0]):
                row = cur.ints(cur.next())
                if len(row) < 3:
                    raise cur.error("element line too short")
                elm_type, n_tags = row[1], row[2]
                nodes = row[3 + n_tags:]
                try:
                    local = [node_ids[n] for n in nodes]
                except KeyError as e:
                    raise cur.error(f"element references unknown node {e.args[0]}") from None
                if elm_type == GMSH_TRIANGLE:
                    if len(local) != 3:
                        raise cur.error("triangle element needs 3 nodes")
                    triangles.append(local)
                elif elm_type == GMSH_LINE:
                    if len(local) != 2:
                        raise cur.error("line element needs 2 nodes")
                    lines.append(local)
                else:
                    skipped[elm_type] = skipped.get(elm_type, 0) + 1
            if cur.next() != "$EndElements":
                raise cur.error("expected $EndElements")

        elif line.startswith("$"):
            # Unknown section (e.g. $PhysicalNames): skip to its end marker
            end = "$End" + line[1:]
            while cur.next() != end:
                pass

    if not seen_format:
        raise MeshFormatError("missing $MeshFormat section", str(path))
    if skipped:
        logger.warning("gmsh_elements_ignored", path=str(path),
                       types={str(k): v for k, v in sorted(skipped.items())})

    declared = np.array(lines, dtype=np.int64).reshape(-1, 2) if lines else None
    return _finalize(np.array(coords, dtype=float).reshape(-1, 2),
                     np.array(triangles, dtype=np.int64).reshape(-1, 3),
                     declared, str(path))


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _content_lines(cur: _Lines):
    while cur.pos < len(cur.lines):
        line = _strip_comment(cur.next())
        if line:
            yield line


def _read_triangle(path: Path) -> Mesh:
    base = path.with_suffix("") if path.suffix in (".node", ".ele") else path
    node_path = base.with_suffix(".node")
    ele_path = base.with_suffix(".ele")
    for p in (node_path, ele_path):
        if not p.exists():
            raise ConfigError(f"mesh file not found: {p}")

    cur = _Lines(node_path)
    rows = _content_lines(cur)
    try:
        header = cur.ints(next(rows))
    except StopIteration:
        raise MeshFormatError("empty .node file", str(node_path)) from None
    if len(header) < 2 or header[1] != 2:
        raise cur.error("node header must be '<#vertices> 2 <#attributes> <#markers>'")
    n_nodes = header[0]
    ids, coords = [], []
    for _ in range(n_nodes):
        try:
            values = cur.floats(next(rows))
        except StopIteration:
            raise cur.error(f"expected {n_nodes} vertices") from None
        if len(values) < 3:
            raise cur.error("vertex line needs id x y")
        ids.append(int(values[0]))
        coords.append(values[1:3])

    # Numbering base comes from the first vertex id
    base_index = ids[0] if ids else 0
    if base_index not in (0, 1):
        raise MeshFormatError(f"first vertex id must be 0 or 1, got {base_index}",
                              str(node_path), None)
    if ids != list(range(base_index, base_index + n_nodes)):
        raise MeshFormatError("vertex ids must be consecutive", str(node_path), None)

    cur = _Lines(ele_path)
    rows = _content_lines(cur)
    try:
        header = cur.ints(next(rows))
    except StopIteration:
        raise MeshFormatError("empty .ele file", str(ele_path)) from None
    if len(header) < 2 or header[1] != 3:
        raise cur.error("element header must be '<#triangles> 3 <#attributes>' (linear triangles only)")
    n_tri = header[0]
    triangles = []
    for _ in range(n_tri):
        try:
            values = cur.ints(next(rows))
        except StopIteration:
            raise cur.error(f"expected {n_tri} triangles") from None
        if len(values) < 4:
            raise cur.error("triangle line needs id v0 v1 v2")
        tri = [v - base_index for v in values[1:4]]
        if min(tri) < 0 or max(tri) >= n_nodes:
            raise cur.error(f"triangle references vertex outside 0..{n_nodes - 1}")
        triangles.append(tri)

    logger.debug("triangle_numbering_detected", base=base_index)
    return _finalize(np.array(coords, dtype=float).reshape(-1, 2),
                     np.array(triangles, dtype=np.int64).reshape(-1, 3),
                     None, str(base))


def load_mesh(path: str | Path, format: str = "gmsh22-ascii") -> Mesh:
    """Read a mesh file and return a validated Mesh."""
    path = Path(path)
    if format == "gmsh22-ascii":
        if not path.exists():
            raise ConfigError(f"mesh file not found: {path}")
        return _read_gmsh22(path)
    if format == "triangle-node-ele":
        return _read_triangle(path)
    raise ConfigError(f"unknown mesh format '{format}', expected one of {FORMATS}")


def write_mesh(mesh: Mesh, path: str | Path, format: str = "gmsh22-ascii") -> Path:
    """
    Write a mesh as Gmsh MSH 2.2 ASCII (1-based ids).

    Boundary edges are written as line elements so that a reload reproduces
    the declared boundary. Coordinates use 17 significant digits.
    """
    if format != "gmsh22-ascii":
        raise ConfigError(f"write_mesh supports gmsh22-ascii only, got '{format}'")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    boundary = mesh.boundary_edges
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_vertices)]
    out.extend(f"{i + 1} {x:.17g} {y:.17g} 0" for i, (x, y) in enumerate(mesh.vertices))
    out.append("$EndNodes")
    out.append("$Elements")
    out.append(str(len(boundary) + mesh.n_triangles))
    elm = 1
    for a, b, _ in boundary:
        out.append(f"{elm} {GMSH_LINE} 2 1 1 {a + 1} {b + 1}")
        elm += 1
    for v0, v1, v2 in mesh.triangles:
        out.append(f"{elm} {GMSH_TRIANGLE} 2 0 1 {v0 + 1} {v1 + 1} {v2 + 1}")
        elm += 1
    out.append("$EndElements")
    path.write_text("\n".join(out) + "\n")
    logger.info("mesh_written", path=str(path), n_triangles=mesh.n_triangles)
    return path
