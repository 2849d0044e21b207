"""Structured simplicial meshes of the unit square and cube.

Meshes are immutable after construction.  Boundary facets carry small
integer markers keyed to the coordinate planes:

    2D: 1 = {x=0}, 2 = {x=1}, 3 = {y=0}, 4 = {y=1}
    3D: 1 = {x=0}, 2 = {x=1}, 3 = {y=0}, 4 = {y=1}, 5 = {z=0}, 6 = {z=1}
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Mesh", "build_unit_square", "build_unit_cube", "vertex_patch"]

_PLANE_TOL = 1e-12


@dataclass(frozen=True)
class Mesh:
    dim: int
    vertices: np.ndarray          # (nverts, dim)
    cells: np.ndarray             # (ncells, dim+1) vertex ids, positively oriented
    boundary_facets: tuple        # ((vertex-id tuple, marker), ...)
    vertex_to_cells: tuple = field(repr=False)  # vertex id -> sorted tuple of cell ids

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_cells(self):
        return len(self.cells)

    def cell_coordinates(self, c):
        return self.vertices[self.cells[c]]

    def cell_volumes(self):
        """Signed volumes of all cells (positive by construction)."""
        verts = self.vertices[self.cells]
        edges = verts[:, 1:, :] - verts[:, :1, :]
        dets = np.linalg.det(edges)
        fact = 2.0 if self.dim == 2 else 6.0
        return dets / fact

    def facet_marker_plane(self, marker):
        """(axis, value) of the coordinate plane a marker refers to."""
        axis = (marker - 1) // 2
        value = float((marker - 1) % 2)
        return axis, value

    def markers(self):
        return tuple(range(1, 2 * self.dim + 1))

    def export_text(self):
        """Plain-text dump (vertex list + cell list) for debugging."""
        lines = [f"dim {self.dim}",
                 f"vertices {self.num_vertices}"]
        for v in self.vertices:
            lines.append(" ".join(repr(float(x)) for x in v))
        lines.append(f"cells {self.num_cells}")
        for c in self.cells:
            lines.append(" ".join(str(int(i)) for i in c))
        return "\n".join(lines) + "\n"


def _adjacency(nverts, cells):
    adj = [[] for _ in range(nverts)]
    for ci, cell in enumerate(cells):
        for v in cell:
            adj[v].append(ci)
    return tuple(tuple(sorted(a)) for a in adj)


def build_unit_square(n):
    """Triangulate [0,1]^2 with an n-by-n grid, each square split along the
    lower-left to upper-right diagonal."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    verts = np.array([(x, y) for y in xs for x in xs])

    def vid(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            # diagonal v00 -- v11
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    cells = np.array(cells, dtype=np.int64)

    facets = []
    for i in range(n):
        facets.append(((vid(0, i), vid(0, i + 1)), 1))
        facets.append(((vid(n, i), vid(n, i + 1)), 2))
        facets.append(((vid(i, 0), vid(i + 1, 0)), 3))
        facets.append(((vid(i, n), vid(i + 1, n)), 4))

    return Mesh(2, verts, cells, tuple(facets), _adjacency(len(verts), cells))


# Kuhn (Freudenthal) split: six tetrahedra per cube, one per permutation of
# the axis order along the path from the low corner to the high corner.
_KUHN_PERMS = tuple(itertools.permutations(range(3)))


def build_unit_cube(n):
    """Tetrahedralise [0,1]^3 with n^3 cubes, each Kuhn-split into 6 tets."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    verts = np.array([(x, y, z) for z in xs for y in xs for x in xs])

    def vid(i, j, k):
        return (k * (n + 1) + j) * (n + 1) + i

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                corner = np.array((i, j, k))
                for perm in _KUHN_PERMS:
                    path = [corner.copy()]
                    for axis in perm:
                        nxt = path[-1].copy()
                        nxt[axis] += 1
                        path.append(nxt)
                    tet = [vid(*p) for p in path]
                    # orient positively: swap last two if needed
                    e = verts[tet[1:]] - verts[tet[0]]
                    if np.linalg.det(e) < 0:
                        tet[2], tet[3] = tet[3], tet[2]
                    cells.append(tuple(tet))
    cells = np.array(cells, dtype=np.int64)

    facets = []
    for axis in range(3):
        for side, plane in ((0, 1), (n, 2)):
            marker = 2 * axis + plane
            for a in range(n):
                for b in range(n):
                    # two triangles per boundary quad; the diagonal runs from
                    # the low to the high corner, matching the Kuhn tet facets
                    def fvid(da, db):
                        idx = [0, 0, 0]
                        idx[axis] = side
                        rest = [ax for ax in range(3) if ax != axis]
                        idx[rest[0]] = a + da
                        idx[rest[1]] = b + db
                        return vid(*idx)

                    v00, v10, v01, v11 = fvid(0, 0), fvid(1, 0), fvid(0, 1), fvid(1, 1)
                    facets.append(((v00, v10, v11), marker))
                    facets.append(((v00, v11, v01), marker))

    return Mesh(3, verts, cells, tuple(facets), _adjacency(len(verts), cells))


def vertex_patch(mesh, v):
    """Cell ids of the patch of cells sharing vertex v, sorted."""
    if not 0 <= v < mesh.num_vertices:
        raise IndexError(f"vertex id {v} out of range [0, {mesh.num_vertices})")
    return mesh.vertex_to_cells[v]
