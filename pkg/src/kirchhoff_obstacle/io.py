"""Plain-text mesh and solution files, grid sampling and raster helpers.

Mesh files::

    vertices <count>
    x y
    ...
    triangles <count>
    i j k          (0-based, counter-clockwise)

Solution files hold ``dofs <count>`` followed by one value per line and are
read together with the mesh they were computed on.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from .mesh import Mesh, build_mesh

__all__ = [
    "write_mesh",
    "read_mesh",
    "write_solution",
    "read_solution",
    "grid_points",
    "sample_solution",
    "write_field_csv",
    "write_raster_csv",
    "read_raster_csv",
    "count_components",
]


def _fmt(v: float) -> str:
    return repr(float(v))


def write_mesh(path, mesh: Mesh) -> None:
    lines = [f"vertices {mesh.n_vertices}"]
    lines += [f"{_fmt(x)} {_fmt(y)}" for x, y in mesh.vertices]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def _section(lines, pos, name):
    if pos >= len(lines):
        raise ValueError(f"missing '{name}' header")
    head = lines[pos].split()
    if len(head) != 2 or head[0] != name:
        raise ValueError(f"line {pos + 1}: expected '{name} <count>', got {lines[pos]!r}")
    try:
        count = int(head[1])
    except ValueError:
        raise ValueError(f"line {pos + 1}: bad count {head[1]!r}") from None
    if count < 0 or pos + 1 + count > len(lines):
        raise ValueError(f"line {pos + 1}: {name} count {count} does not match the file")
    return count


def read_mesh(path) -> Mesh:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    nv = _section(lines, 0, "vertices")
    vertices = np.array([[float(t) for t in ln.split()] for ln in lines[1 : 1 + nv]], dtype=float)
    pos = 1 + nv
    nt = _section(lines, pos, "triangles")
    triangles = np.array([[int(t) for t in ln.split()] for ln in lines[pos + 1 : pos + 1 + nt]], dtype=np.int64)
    if vertices.shape != (nv, 2) or triangles.shape != (nt, 3):
        raise ValueError("malformed coordinate or connectivity rows")
    return build_mesh(vertices, triangles)


def write_solution(path, dofs) -> None:
    dofs = np.asarray(dofs, dtype=float)
    Path(path).write_text(f"dofs {len(dofs)}\n" + "".join(_fmt(v) + "\n" for v in dofs))


def read_solution(path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    n = _section(lines, 0, "dofs")
    return np.array([float(v) for v in lines[1 : 1 + n]])


def grid_points(resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centred ``resolution x resolution`` grid on the unit square.

    Returns the 1D coordinates and the (resolution**2, 2) points, row-major in y.
    """
    t = (np.arange(resolution) + 0.5) / resolution
    X, Y = np.meshgrid(t, t, indexing="xy")
    return t, np.stack([X.ravel(), Y.ravel()], axis=1)


def sample_solution(solution, resolution: int = 256):
    """``(points, u, lambda)`` of a discrete solution on the cell-centred grid."""
    _, pts = grid_points(resolution)
    elements = solution.space.locate(pts)
    u = solution.values(pts, elements)
    lam = solution.reaction_at(pts, elements)
    return pts, u, lam


def write_field_csv(path, points, u, lam) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,u,lambda\n")
        for (x, y), a, b in zip(points, u, lam):
            fh.write(f"{_fmt(x)},{_fmt(y)},{_fmt(a)},{_fmt(b)}\n")


def write_raster_csv(path, raster) -> None:
    """Write a 0/1 raster, one grid row (fixed y, increasing x) per line, bottom row first."""
    raster = np.asarray(raster)
    with open(path, "w") as fh:
        for row in raster.astype(int):
            fh.write(",".join(map(str, row)) + "\n")


def read_raster_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=int, ndmin=2).astype(bool)


def count_components(raster) -> int:
    """Number of 4-connected components of the true cells."""
    return int(ndimage.label(np.asarray(raster, dtype=bool))[1])
