"""Global function spaces, mixed spaces, and Dirichlet boundary conditions.

Scalar dofs are discovered cell-by-cell through entity keys (the mesh
entity a node sits on plus its position along it), which makes dofs shared
between adjacent cells coincide.  Vector spaces interleave components per
node.  Mixed spaces concatenate their fields, so every field owns one
contiguous index range.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .elements import lagrange_element

__all__ = ["FunctionSpace", "MixedSpace", "DirichletBC", "build_space",
           "taylor_hood", "interpolate"]

_PLANE_TOL = 1e-12


class FunctionSpace:
    def __init__(self, mesh, element):
        if element.dim != mesh.dim:
            raise ValueError("element dimension does not match mesh dimension")
        self.mesh = mesh
        self.element = element

        degree = element.degree
        key_to_sdof = {}
        coords = []
        cell_sdofs = np.empty((mesh.num_cells, element.nnodes), dtype=np.int64)
        for ci, cell in enumerate(mesh.cells):
            cell_verts = mesh.vertices[cell]
            for ln, multi in enumerate(element.node_multiindex):
                support = [a for a in range(len(multi)) if multi[a] > 0]
                gverts = [int(cell[a]) for a in support]
                order = np.argsort(gverts)
                key = (tuple(gverts[i] for i in order),
                       tuple(multi[support[i]] for i in order))
                sdof = key_to_sdof.get(key)
                if sdof is None:
                    sdof = len(key_to_sdof)
                    key_to_sdof[key] = sdof
                    x = sum(multi[a] / degree * cell_verts[a]
                            for a in range(len(multi)))
                    coords.append(x)
                cell_sdofs[ci, ln] = sdof

        self.num_scalar_dofs = len(key_to_sdof)
        self.scalar_dof_coords = np.array(coords)
        self.cell_scalar_dofs = cell_sdofs

        nc = element.ncomp
        # cell-local layout: node-major, components fastest
        self.cell_dofs = (cell_sdofs[:, :, None] * nc
                          + np.arange(nc)[None, None, :]).reshape(mesh.num_cells, -1)
        self.num_dofs = self.num_scalar_dofs * nc

    @property
    def ncomp(self):
        return self.element.ncomp

    def dof_coords(self):
        """Coordinates per (possibly vector) global dof."""
        return np.repeat(self.scalar_dof_coords, self.ncomp, axis=0)

    def boundary_scalar_dofs(self, markers):
        on = np.zeros(self.num_scalar_dofs, dtype=bool)
        for m in markers:
            if not 1 <= m <= 2 * self.mesh.dim:
                raise ValueError(f"invalid boundary marker {m}")
            axis, value = self.mesh.facet_marker_plane(m)
            on |= np.abs(self.scalar_dof_coords[:, axis] - value) <= _PLANE_TOL
        return np.nonzero(on)[0]

    def boundary_dofs(self, markers):
        """Sorted global dofs (all components) whose nodes lie on the
        facets carrying the given markers."""
        sdofs = self.boundary_scalar_dofs(markers)
        nc = self.ncomp
        dofs = (sdofs[:, None] * nc + np.arange(nc)[None, :]).ravel()
        return np.sort(dofs)


class MixedSpace:
    """Ordered collection of function spaces with field-major dof layout."""

    def __init__(self, fields):
        fields = tuple(fields)
        if not fields:
            raise ValueError("mixed space needs at least one field")
        mesh = fields[0].mesh
        if any(f.mesh is not mesh for f in fields):
            raise ValueError("all fields must share one mesh")
        self.mesh = mesh
        self.fields = fields
        sizes = [f.num_dofs for f in fields]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.num_dofs = int(self.offsets[-1])

    @property
    def num_fields(self):
        return len(self.fields)

    def field_index_set(self, i):
        return np.arange(self.offsets[i], self.offsets[i + 1], dtype=np.int64)

    def field_slice(self, i):
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def split(self, x):
        return [x[self.field_slice(i)] for i in range(self.num_fields)]


def build_space(mesh, degree, ncomp=1):
    return FunctionSpace(mesh, lagrange_element(mesh.dim, degree, ncomp))


def taylor_hood(mesh, degree=2):
    """Vector P(k) velocity with P(k-1) pressure."""
    V = build_space(mesh, degree, ncomp=mesh.dim)
    W = build_space(mesh, degree - 1)
    return MixedSpace([V, W])


@dataclass
class DirichletBC:
    """Dirichlet data on a set of boundary markers.

    `value` is a constant, a sequence of per-component constants, or a
    callable of the node coordinates.  `field` names the field when the BC
    lives inside a mixed space.
    """

    space: FunctionSpace
    markers: tuple
    value: object = 0.0
    field: int = 0
    dofs: np.ndarray = dc_field(init=False, repr=False)
    values: np.ndarray = dc_field(init=False, repr=False)

    def __post_init__(self):
        self.markers = tuple(self.markers)
        sdofs = self.space.boundary_scalar_dofs(self.markers)
        nc = self.space.ncomp
        self.dofs = (sdofs[:, None] * nc + np.arange(nc)[None, :]).ravel()
        vals = np.empty((len(sdofs), nc))
        for i, s in enumerate(sdofs):
            x = self.space.scalar_dof_coords[s]
            g = self.value(x) if callable(self.value) else self.value
            vals[i, :] = g
        self.values = vals.ravel()
        order = np.argsort(self.dofs)
        self.dofs = self.dofs[order]
        self.values = self.values[order]


def interpolate(space, fn):
    """Nodal interpolation of fn(x) into the space."""
    out = np.empty(space.num_dofs)
    nc = space.ncomp
    for s, x in enumerate(space.scalar_dof_coords):
        g = fn(x) if callable(fn) else fn
        out[s * nc:(s + 1) * nc] = g
    return out
