"""Level-set extraction: influence-culled field accumulation, marching cubes,
and small-component removal."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _field_kernels as _k
from ._mc_tables import CORNERS, EDGES, TRIANGLES
from .errors import InvalidInputError
from .mesh import TriangleMesh

DEFAULT_EPSILON = 1e-3
DEFAULT_MIN_AREA = 0.005
DEFAULT_RESOLUTION = 128
DEFAULT_BOUNDS = (-0.55, 0.55)

_EDGE_AXIS = np.argmax(np.abs(CORNERS[EDGES[:, 1]] - CORNERS[EDGES[:, 0]]), axis=1)
_EDGE_START = np.minimum(CORNERS[EDGES[:, 0]], CORNERS[EDGES[:, 1]])


@dataclass(frozen=True)
class ScalarField:
    """Samples on the vertices of a regular grid."""

    values: np.ndarray
    origin: np.ndarray
    cell_size: float

    @property
    def resolution(self):
        return tuple(s - 1 for s in self.values.shape)

    def points(self):
        axes = [self.origin[d] + np.arange(self.values.shape[d]) * self.cell_size for d in range(3)]
        g = np.meshgrid(*axes, indexing="ij")
        return np.stack(g, axis=-1)


def influence_half_width(epsilon):
    """Distance in radii beyond which exp(-d^2/2) drops below ``epsilon``."""
    if epsilon <= 0:
        return math.inf
    if epsilon >= 1:
        return 0.0
    return math.sqrt(2.0 * math.log(1.0 / epsilon))


def influence_bounds(element, epsilon=DEFAULT_EPSILON):
    """Axis-aligned box outside of which ``f/c < epsilon`` for this element."""
    if not 0 < epsilon < 1:
        raise InvalidInputError("epsilon must lie in (0, 1)")
    half = np.asarray(element.r) * influence_half_width(epsilon)
    p = np.asarray(element.p)
    return p - half, p + half


def grid_for(resolution, bounds=DEFAULT_BOUNDS):
    lo, hi = bounds
    cell = (hi - lo) / resolution
    return np.full(3, float(lo)), float(cell), (resolution + 1,) * 3


def accumulate_field(template, resolution=DEFAULT_RESOLUTION, epsilon=DEFAULT_EPSILON, bounds=DEFAULT_BOUNDS):
    """Sum element contributions onto the grid, skipping negligible regions.

    ``epsilon=0`` visits every grid vertex for every element.
    """
    if resolution < 8:
        raise InvalidInputError("resolution must be at least 8")
    if not 0 <= epsilon < 1:
        raise InvalidInputError("epsilon must lie in [0, 1)")
    origin, cell, shape = grid_for(int(resolution), bounds)
    values = _k.accumulate(
        template.constants, template.centers, template.radii,
        origin, cell, np.asarray(shape, dtype=np.int64), influence_half_width(epsilon),
    )
    return ScalarField(values, origin, cell)


def brute_force_field(template, resolution=DEFAULT_RESOLUTION, bounds=DEFAULT_BOUNDS):
    origin, cell, shape = grid_for(int(resolution), bounds)
    field = ScalarField(np.zeros(shape), origin, cell)
    pts = field.points().reshape(-1, 3)
    vals = _k.field_values(np.ascontiguousarray(pts), template.constants, template.centers, template.radii)
    return ScalarField(vals.reshape(shape), origin, cell)


def marching_cubes(field, isolevel):
    """Polygonize ``values == isolevel``; normals face increasing values.

    Vertices on shared cell edges are emitted once. An empty mesh is
    returned when the field never crosses the isolevel.
    """
    v = np.asarray(field.values, dtype=float)
    nx, ny, nz = v.shape
    below = v < isolevel
    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for k, (a, b, c) in enumerate(CORNERS):
        case |= below[a:nx - 1 + a, b:ny - 1 + b, c:nz - 1 + c].astype(np.int64) << k
    active = np.nonzero((case != 0) & (case != 255))
    if len(active[0]) == 0:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    # one vertex per crossing grid edge, numbered axis by axis in C order
    vid = np.full((3, nx, ny, nz), -1, dtype=np.int64)
    positions = []
    count = 0
    for axis in range(3):
        sl0 = [slice(None)] * 3
        sl1 = [slice(None)] * 3
        sl0[axis] = slice(0, v.shape[axis] - 1)
        sl1[axis] = slice(1, None)
        v0 = v[tuple(sl0)]
        v1 = v[tuple(sl1)]
        cross = below[tuple(sl0)] != below[tuple(sl1)]
        idx = np.nonzero(cross)
        n = len(idx[0])
        target = vid[axis][tuple(sl0)]
        target[idx] = count + np.arange(n)
        a0 = v0[idx]
        t = (isolevel - a0) / (v1[idx] - a0)
        pos = np.stack(idx, axis=1).astype(float)
        pos[:, axis] += t
        positions.append(field.origin + pos * field.cell_size)
        count += n
    verts = np.concatenate(positions)

    cells = np.stack(active, axis=1)
    tri_edges = TRIANGLES[case[active]][:, :15].reshape(-1, 5, 3)
    valid = tri_edges[:, :, 0] >= 0
    per_cell = valid.sum(axis=1)
    cell_of = np.repeat(cells, per_cell, axis=0)
    edges = tri_edges[valid]
    faces = np.empty_like(edges)
    for col in range(3):
        e = edges[:, col]
        start = cell_of + _EDGE_START[e]
        faces[:, col] = vid[_EDGE_AXIS[e], start[:, 0], start[:, 1], start[:, 2]]
    # the table winds triangles toward the below-isolevel side
    faces = faces[:, ::-1].copy()
    return TriangleMesh(verts, faces)


def filter_components(mesh, area_threshold=DEFAULT_MIN_AREA):
    """Remove edge-connected components whose total area is below the threshold."""
    if mesh.is_empty or area_threshold <= 0:
        return mesh
    t = mesh.triangles
    nt = len(t)
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    owner = np.tile(np.arange(nt), 3)
    _, key = np.unique(e, axis=0, return_inverse=True)
    key = key.reshape(-1)
    order = np.argsort(key, kind="stable")
    ks = key[order]
    os_ = owner[order]
    same = ks[1:] == ks[:-1]
    adj = coo_matrix((np.ones(int(same.sum())), (os_[:-1][same], os_[1:][same])), shape=(nt, nt))
    ncomp, comp = connected_components(adj, directed=False)
    area = np.bincount(comp, weights=mesh.face_areas(), minlength=ncomp)
    keep = area[comp] >= area_threshold
    if keep.all():
        return mesh
    return TriangleMesh(mesh.vertices, t[keep]).compacted()


def extract(template, resolution=DEFAULT_RESOLUTION, epsilon=DEFAULT_EPSILON,
            area_threshold=DEFAULT_MIN_AREA, isolevel=None, bounds=DEFAULT_BOUNDS):
    field = accumulate_field(template, resolution, epsilon, bounds)
    level = template.isolevel if isolevel is None else float(isolevel)
    return filter_components(marching_cubes(field, level), area_threshold)
