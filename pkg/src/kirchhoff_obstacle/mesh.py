"""Conforming triangular meshes with uniform and red-green-blue refinement.

A :class:`Mesh` is immutable.  Besides the leaf triangulation it carries the
bookkeeping needed by :func:`rgb_refine`: which triangles are green/blue closure
children (and of which parent), and the map from split edges to their midpoint
vertex.  Closure is recomputed from scratch on every call, so green and blue
triangles are never refined further; their parent is restored and red-refined
instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Mesh",
    "ElementGeometry",
    "NONE",
    "RED",
    "GREEN",
    "BLUE",
    "build_structured_unit_square",
    "build_mesh",
    "uniform_refine",
    "rgb_refine",
    "element_geometry",
]

NONE, RED, GREEN, BLUE = 0, 1, 2, 3
TAG_NAMES = {NONE: "none", RED: "red", GREEN: "green", BLUE: "blue"}


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation of a polygonal domain.

    Parameters
    ----------
    vertices : (nv, 2) array
    triangles : (nt, 3) int array, counter-clockwise
    tags : (nt,) int array of refinement tags (NONE, RED, GREEN, BLUE)
    parents : (nt,) int array, index into ``closure_parents`` for green/blue
        children and -1 otherwise
    closure_parents : (np, 3) int array of the triangles the closure children
        were cut from
    closure_parent_tags : (np,) tags of those parents
    midpoints : mapping from sorted vertex pairs to the vertex at their midpoint
    """

    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray = None
    parents: np.ndarray = None
    closure_parents: np.ndarray = None
    closure_parent_tags: np.ndarray = None
    midpoints: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        nt = len(self.triangles)
        object.__setattr__(self, "vertices", _frozen(self.vertices, float).reshape(-1, 2))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64).reshape(-1, 3))
        if self.tags is None:
            object.__setattr__(self, "tags", np.zeros(nt, dtype=np.int8))
        if self.parents is None:
            object.__setattr__(self, "parents", -np.ones(nt, dtype=np.int64))
        if self.closure_parents is None:
            object.__setattr__(self, "closure_parents", np.zeros((0, 3), dtype=np.int64))
        if self.closure_parent_tags is None:
            object.__setattr__(self, "closure_parent_tags", np.zeros(0, dtype=np.int8))
        object.__setattr__(self, "tags", _frozen(self.tags, np.int8))
        object.__setattr__(self, "parents", _frozen(self.parents, np.int64))
        object.__setattr__(
            self, "closure_parents", _frozen(self.closure_parents, np.int64).reshape(-1, 3)
        )
        object.__setattr__(self, "closure_parent_tags", _frozen(self.closure_parent_tags, np.int8))
        if len(self.tags) != nt or len(self.parents) != nt:
            raise ValueError("tags/parents must have one entry per triangle")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle references a vertex that does not exist")
        if np.any(self.signed_areas <= 0.0):
            bad = np.flatnonzero(self.signed_areas <= 0.0)
            raise ValueError(f"triangles {bad[:10].tolist()} are not counter-clockwise")
        if np.any(self.edge_triangle_count > 2):
            raise ValueError("an edge is shared by more than two triangles")

    # ---- sizes -----------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    # ---- connectivity ----------------------------------------------------
    @cached_property
    def _edge_data(self):
        t = self.triangles
        # local edge k runs from vertex k to vertex k+1
        pairs = np.stack([t, np.roll(t, -1, axis=1)], axis=2).reshape(-1, 2)
        pairs = np.sort(pairs, axis=1)
        edges, inverse, counts = np.unique(
            pairs, axis=0, return_inverse=True, return_counts=True
        )
        return edges, inverse.reshape(-1, 3), counts

    @cached_property
    def edges(self) -> np.ndarray:
        """(ne, 2) sorted vertex pairs, lexicographically ordered."""
        return _frozen(self._edge_data[0], np.int64)

    @cached_property
    def triangle_edges(self) -> np.ndarray:
        """(nt, 3) global edge index of local edge k = (v_k, v_{k+1})."""
        return _frozen(self._edge_data[1], np.int64)

    @cached_property
    def edge_triangle_count(self) -> np.ndarray:
        return _frozen(self._edge_data[2], np.int64)

    @cached_property
    def edge_triangles(self) -> np.ndarray:
        """(ne, 2) incident triangles; second column is -1 on the boundary."""
        out = -np.ones((self.n_edges, 2), dtype=np.int64)
        flat = self.triangle_edges.ravel()
        tri = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(flat, kind="stable")
        flat, tri = flat[order], tri[order]
        first = np.ones(len(flat), dtype=bool)
        first[1:] = flat[1:] != flat[:-1]
        out[flat[first], 0] = tri[first]
        out[flat[~first], 1] = tri[~first]
        return _frozen(out, np.int64)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Boolean flag per edge."""
        return _frozen(self.edge_triangles[:, 1] < 0, bool)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """Boolean flag per vertex."""
        flag = np.zeros(self.n_vertices, dtype=bool)
        flag[self.edges[self.boundary_edges].ravel()] = True
        return _frozen(flag, bool)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_edges)

    # ---- geometry --------------------------------------------------------
    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return _frozen(0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]), float)

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return _frozen(np.hypot(d[:, 0], d[:, 1]), float)

    @cached_property
    def diameters(self) -> np.ndarray:
        """h_K, the longest edge of each triangle."""
        return _frozen(self.edge_lengths[self.triangle_edges].max(axis=1), float)

    @cached_property
    def centroids(self) -> np.ndarray:
        return _frozen(self.vertices[self.triangles].mean(axis=1), float)

    @cached_property
    def min_angles(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        out = np.full(self.n_triangles, np.pi)
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            out = np.minimum(out, np.arccos(np.clip(cos, -1.0, 1.0)))
        return _frozen(out, float)

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Global unit normal of each edge, the tangent from the lower to the
        higher vertex id rotated clockwise."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        d = d / self.edge_lengths[:, None]
        return _frozen(np.stack([d[:, 1], -d[:, 0]], axis=1), float)

    def __repr__(self) -> str:
        return (
            f"Mesh(n_vertices={self.n_vertices}, n_triangles={self.n_triangles}, "
            f"n_edges={self.n_edges})"
        )


@dataclass(frozen=True)
class ElementGeometry:
    """Geometric data of a single triangle."""

    triangle: int
    vertex_ids: np.ndarray  # (3,)
    vertices: np.ndarray  # (3, 2)
    diameter: float
    area: float
    edge_lengths: np.ndarray  # (3,), local edge k = (v_k, v_k+1)
    normals: np.ndarray  # (3, 2) outward
    tangents: np.ndarray  # (3, 2) counter-clockwise


def build_mesh(vertices, triangles) -> Mesh:
    """Mesh from raw arrays; clockwise triangles are reoriented."""
    v = np.asarray(vertices, dtype=float)
    t = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if t.size and (t.min() < 0 or t.max() >= len(v)):
        raise ValueError("triangle references a vertex that does not exist")
    p = v[t]
    area = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    flip = area < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    return Mesh(v, t)


def build_structured_unit_square(n: int, pattern: str = "crossed") -> Mesh:
    """Triangulate [0, 1]^2 with an n x n grid of squares, two triangles each.

    ``pattern`` selects the diagonal: ``"anti"`` cuts every square from
    (x_i + h, y_j) to (x_i, y_j + h), ``"main"`` from (x_i, y_j) to
    (x_i + h, y_j + h), and ``"crossed"`` points every diagonal towards the
    centre of the square so the mesh is symmetric about both midlines.
    """
    n = int(n)
    if n < 1:
        raise ValueError("subdivision count must be at least 1")
    if pattern not in ("anti", "main", "crossed"):
        raise ValueError(f"unknown diagonal pattern {pattern!r}")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)
    tris = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b = a + 1
            c = a + (n + 1)
            d = c + 1
            main = pattern == "main"
            if pattern == "crossed":
                # the main diagonal points to the centre in the lower-left and upper-right quadrants
                main = (2 * i + 1 < n) == (2 * j + 1 < n)
            if main:
                tris.append((a, b, d))
                tris.append((a, d, c))
            else:
                tris.append((a, b, c))
                tris.append((b, d, c))
    return Mesh(vertices, tris)


def element_geometry(mesh: Mesh, triangle: int) -> ElementGeometry:
    if not 0 <= int(triangle) < mesh.n_triangles:
        raise IndexError(f"triangle {triangle} out of range [0, {mesh.n_triangles})")
    ids = mesh.triangles[triangle]
    p = mesh.vertices[ids]
    d = np.roll(p, -1, axis=0) - p
    lengths = np.hypot(d[:, 0], d[:, 1])
    s = d / lengths[:, None]
    n = np.stack([s[:, 1], -s[:, 0]], axis=1)
    return ElementGeometry(
        triangle=int(triangle),
        vertex_ids=ids.copy(),
        vertices=p.copy(),
        diameter=float(lengths.max()),
        area=float(mesh.signed_areas[triangle]),
        edge_lengths=lengths,
        normals=n,
        tangents=s,
    )


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------


def _tri_edges(t):
    return (_edge(t[0], t[1]), _edge(t[1], t[2]), _edge(t[2], t[0]))


def _key(t):
    return tuple(sorted(t))


class _Builder:
    """Mutable vertex list and midpoint map shared by the refinement passes."""

    def __init__(self, mesh: Mesh):
        self.vertices = [tuple(v) for v in mesh.vertices.tolist()]
        self.midpoints = dict(mesh.midpoints)

    def split(self, edges: Iterable[tuple[int, int]]):
        for e in sorted(set(edges)):
            if e in self.midpoints:
                continue
            a, b = self.vertices[e[0]], self.vertices[e[1]]
            self.vertices.append((0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])))
            self.midpoints[e] = len(self.vertices) - 1

    def length2(self, e):
        a, b = self.vertices[e[0]], self.vertices[e[1]]
        return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2

    def ref_edge(self, t):
        """Local index k of the refinement edge (v_k, v_k+1): the longest,
        ties broken by the lexicographically smallest vertex-id pair."""
        edges = _tri_edges(t)
        lens = [self.length2(e) for e in edges]
        longest = max(lens)
        cands = [k for k in range(3) if lens[k] >= longest * (1.0 - 1e-12)]
        return min(cands, key=lambda k: edges[k])

    def red(self, t):
        a, b, c = t
        mab = self.midpoints[_edge(a, b)]
        mbc = self.midpoints[_edge(b, c)]
        mca = self.midpoints[_edge(c, a)]
        return [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]

    def closure(self, t, split):
        """Green or blue children of ``t`` given its set of split edges."""
        k = self.ref_edge(t)
        # rotate so the refinement edge is (b, c), opposite a
        a, b, c = t[(k + 2) % 3], t[k], t[(k + 1) % 3]
        m = self.midpoints[_edge(b, c)]
        ab, ca = _edge(a, b) in split, _edge(c, a) in split
        if not ab and not ca:
            return GREEN, [(a, b, m), (a, m, c)]
        if ab:
            mab = self.midpoints[_edge(a, b)]
            return BLUE, [(a, mab, m), (mab, b, m), (a, m, c)]
        mca = self.midpoints[_edge(c, a)]
        return BLUE, [(a, b, m), (a, m, mca), (mca, m, c)]

    def half_owners(self, base):
        """Map each half of a split base edge to the index of its base owner."""
        owner = {}
        for i, (t, _) in enumerate(base):
            for e in _tri_edges(t):
                m = self.midpoints.get(e)
                if m is not None:
                    owner[_edge(e[0], m)] = i
                    owner[_edge(m, e[1])] = i
        return owner


def _collapse(mesh: Mesh):
    """Replace closure groups by their parents; returns the base list and the
    base index of every leaf triangle."""
    base = []
    leaf_to_base = np.empty(mesh.n_triangles, dtype=np.int64)
    seen = {}
    for i, t in enumerate(mesh.triangles.tolist()):
        if mesh.tags[i] in (GREEN, BLUE):
            p = int(mesh.parents[i])
            if p not in seen:
                seen[p] = len(base)
                base.append(
                    (tuple(mesh.closure_parents[p].tolist()), int(mesh.closure_parent_tags[p]))
                )
            leaf_to_base[i] = seen[p]
        else:
            leaf_to_base[i] = len(base)
            base.append((tuple(t), int(mesh.tags[i])))
    return base, leaf_to_base


def uniform_refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four similar children through edge midpoints."""
    b = _Builder(mesh)
    tris = [tuple(t) for t in mesh.triangles.tolist()]
    b.split(e for t in tris for e in _tri_edges(t))
    out = [c for t in tris for c in b.red(t)]
    return Mesh(
        np.array(b.vertices),
        np.array(out, dtype=np.int64),
        tags=np.full(len(out), RED, dtype=np.int8),
        midpoints=b.midpoints,
    )


def rgb_refine(mesh: Mesh, marked) -> Mesh:
    """Red-refine the marked triangles and close the mesh with green/blue
    bisections so that no hanging nodes remain."""
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked, dtype=np.int64))
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.n_triangles:
        raise IndexError("marked triangle id out of range")

    b = _Builder(mesh)
    base, leaf_to_base = _collapse(mesh)
    pending = {_key(base[i][0]) for i in leaf_to_base[marked].tolist()}

    while True:
        # red stage: refine pending base triangles, pulling in coarser
        # neighbours so that every base edge carries at most one hanging node
        while True:
            keys = [_key(t) for t, _ in base]
            todo = [i for i, k in enumerate(keys) if k in pending]
            if not todo:
                break
            owner = b.half_owners(base)
            stack = list(todo)
            todo = set(todo)
            while stack:
                i = stack.pop()
                for e in _tri_edges(base[i][0]):
                    j = owner.get(e)
                    if j is not None and j not in todo:
                        todo.add(j)
                        stack.append(j)
            b.split(e for i in todo for e in _tri_edges(base[i][0]))
            new_base = []
            for i, (t, tag) in enumerate(base):
                if i in todo:
                    pending.discard(keys[i])
                    new_base.extend((c, RED) for c in b.red(t))
                else:
                    new_base.append((t, tag))
            base = new_base

        # closure stage
        split = {e for t, _ in base for e in _tri_edges(t) if e in b.midpoints}
        changed = True
        while changed:
            changed = False
            for t, _ in base:
                edges = _tri_edges(t)
                if any(e in split for e in edges):
                    r = edges[b.ref_edge(t)]
                    if r not in split:
                        split.add(r)
                        changed = True
        conflicts = set()
        for t, _ in base:
            if all(e in split for e in _tri_edges(t)):
                conflicts.add(_key(t))
        owner = b.half_owners(base)
        for e in split:
            if e not in b.midpoints and e in owner:
                conflicts.add(_key(base[owner[e]][0]))
        if not conflicts:
            break
        pending |= conflicts

    b.split(split)
    tris, tags, parents, cparents, ctags = [], [], [], [], []
    for t, tag in base:
        if not any(e in split for e in _tri_edges(t)):
            tris.append(t)
            tags.append(tag)
            parents.append(-1)
            continue
        kind, children = b.closure(t, split)
        cparents.append(t)
        ctags.append(tag)
        for c in children:
            tris.append(c)
            tags.append(kind)
            parents.append(len(cparents) - 1)
    return Mesh(
        np.array(b.vertices),
        np.array(tris, dtype=np.int64),
        tags=np.array(tags, dtype=np.int8),
        parents=np.array(parents, dtype=np.int64),
        closure_parents=np.array(cparents, dtype=np.int64).reshape(-1, 3),
        closure_parent_tags=np.array(ctags, dtype=np.int8),
        midpoints=b.midpoints,
    )
