"""Dense voxelization, flood fill and watertight remeshing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._accel import USE_NUMBA, njit
from .errors import InvalidInputError
from .isosurface import ScalarField, marching_cubes

log = logging.getLogger(__name__)

OUTSIDE = 0
INSIDE = 1
SURFACE = 2
UNKNOWN = 3

DEFAULT_RESOLUTION = 128

_SIX = ndimage.generate_binary_structure(3, 1)


@dataclass
class VoxelGrid:
    """Cell states on a cubic grid; cell (i, j, k) spans origin + [i, i+1) * cell_size."""

    occupancy: np.ndarray
    origin: np.ndarray
    cell_size: float
    leaked: bool = field(default=False)

    @property
    def resolution(self):
        return self.occupancy.shape[0]

    def count(self, state):
        return int(np.count_nonzero(self.occupancy == state))

    def inside_fraction(self):
        """Enclosed volume estimate as a fraction of the grid: inside cells
        plus half of the surface cells."""
        if not np.any(self.occupancy == INSIDE):
            return 0.0
        return (self.count(INSIDE) + 0.5 * self.count(SURFACE)) / self.occupancy.size

    def solid(self):
        """Inside or surface cells."""
        return (self.occupancy == INSIDE) | (self.occupancy == SURFACE)

    def cell_index(self, points):
        idx = np.floor((np.asarray(points, dtype=float) - self.origin) / self.cell_size).astype(np.int64)
        return np.clip(idx, 0, np.asarray(self.occupancy.shape) - 1)

    def label_at(self, points):
        """0 for points in inside or surface cells, 1 otherwise."""
        i = self.cell_index(points)
        state = self.occupancy[i[:, 0], i[:, 1], i[:, 2]]
        return np.where(state == OUTSIDE, 1, 0).astype(np.uint8)


def default_frame(resolution):
    """Grid covering the normalized box [-0.5, 0.5]^3."""
    return np.full(3, -0.5), 1.0 / resolution


# -- triangle / box overlap ---------------------------------------------------


@njit
def _axis_separates(ax, ay, az, v, half):
    p0 = v[0, 0] * ax + v[0, 1] * ay + v[0, 2] * az
    p1 = v[1, 0] * ax + v[1, 1] * ay + v[1, 2] * az
    p2 = v[2, 0] * ax + v[2, 1] * ay + v[2, 2] * az
    lo = min(p0, min(p1, p2))
    hi = max(p0, max(p1, p2))
    rad = half * (abs(ax) + abs(ay) + abs(az))
    return lo > rad or hi < -rad


@njit
def _voxelize_numba(corners, origin, cell, res, occ):
    half = 0.5 * cell * (1.0 + 1e-9)
    v = np.empty((3, 3))
    edges = np.empty((3, 3))
    for t in range(corners.shape[0]):
        lo = np.empty(3, dtype=np.int64)
        hi = np.empty(3, dtype=np.int64)
        for d in range(3):
            mn = min(corners[t, 0, d], min(corners[t, 1, d], corners[t, 2, d]))
            mx = max(corners[t, 0, d], max(corners[t, 1, d], corners[t, 2, d]))
            lo[d] = max(int(np.floor((mn - origin[d]) / cell - 1e-9)), 0)
            hi[d] = min(int(np.floor((mx - origin[d]) / cell + 1e-9)), res - 1)
        for k in range(3):
            for d in range(3):
                edges[k, d] = corners[t, (k + 1) % 3, d] - corners[t, k, d]
        nx = edges[0, 1] * edges[1, 2] - edges[0, 2] * edges[1, 1]
        ny = edges[0, 2] * edges[1, 0] - edges[0, 0] * edges[1, 2]
        nz = edges[0, 0] * edges[1, 1] - edges[0, 1] * edges[1, 0]
        for i in range(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                for k in range(lo[2], hi[2] + 1):
                    if occ[i, j, k] == SURFACE:
                        continue
                    cx = origin[0] + (i + 0.5) * cell
                    cy = origin[1] + (j + 0.5) * cell
                    cz = origin[2] + (k + 0.5) * cell
                    for a in range(3):
                        v[a, 0] = corners[t, a, 0] - cx
                        v[a, 1] = corners[t, a, 1] - cy
                        v[a, 2] = corners[t, a, 2] - cz
                    if _axis_separates(1.0, 0.0, 0.0, v, half):
                        continue
                    if _axis_separates(0.0, 1.0, 0.0, v, half):
                        continue
                    if _axis_separates(0.0, 0.0, 1.0, v, half):
                        continue
                    if _axis_separates(nx, ny, nz, v, half):
                        continue
                    sep = False
                    for e in range(3):
                        ex = edges[e, 0]
                        ey = edges[e, 1]
                        ez = edges[e, 2]
                        # edge x unit axes
                        if (_axis_separates(0.0, -ez, ey, v, half) or _axis_separates(ez, 0.0, -ex, v, half)
                                or _axis_separates(-ey, ex, 0.0, v, half)):
                            sep = True
                            break
                    if not sep:
                        occ[i, j, k] = SURFACE


def _separates_np(axis, v, half):
    """axis (3,) or (K, 3); v (K, 3, 3) triangle corners relative to box centers."""
    p = np.einsum("kad,kd->ka", v, np.broadcast_to(axis, (v.shape[0], 3)))
    rad = half * np.abs(np.broadcast_to(axis, (v.shape[0], 3))).sum(axis=1)
    return (p.min(axis=1) > rad) | (p.max(axis=1) < -rad)


def _voxelize_numpy(corners, origin, cell, res, occ):
    half = 0.5 * cell * (1.0 + 1e-9)
    units = np.eye(3)
    for tri in corners:
        lo = np.maximum(np.floor((tri.min(axis=0) - origin) / cell - 1e-9).astype(np.int64), 0)
        hi = np.minimum(np.floor((tri.max(axis=0) - origin) / cell + 1e-9).astype(np.int64), res - 1)
        if np.any(hi < lo):
            continue
        ii, jj, kk = np.meshgrid(*[np.arange(lo[d], hi[d] + 1) for d in range(3)], indexing="ij")
        idx = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
        centers = origin + (idx + 0.5) * cell
        v = tri[None, :, :] - centers[:, None, :]
        edges = np.roll(tri, -1, axis=0) - tri
        sep = np.zeros(len(idx), dtype=bool)
        for u in units:
            sep |= _separates_np(u, v, half)
        sep |= _separates_np(np.cross(edges[0], edges[1]), v, half)
        for e in edges:
            for u in units:
                sep |= _separates_np(np.cross(u, e), v, half)
        hit = idx[~sep]
        occ[hit[:, 0], hit[:, 1], hit[:, 2]] = SURFACE


# -- public ----------------------------------------------------------------------


def mark_surface(mesh, resolution, origin, cell):
    occ = np.full((resolution,) * 3, UNKNOWN, dtype=np.uint8)
    corners = np.ascontiguousarray(mesh.corners(), dtype=float)
    if USE_NUMBA:
        _voxelize_numba(corners, np.asarray(origin, dtype=float), float(cell), int(resolution), occ)
    else:
        _voxelize_numpy(corners, np.asarray(origin, dtype=float), float(cell), int(resolution), occ)
    return occ


def flood_fill(grid):
    """Label every non-surface cell as outside (reachable from beyond the grid
    through face-adjacent non-surface cells) or inside. Idempotent."""
    occ = grid.occupancy
    free = occ != SURFACE
    # a virtual free layer around the grid seeds the fill from every border cell
    labels, _ = ndimage.label(np.pad(free, 1, constant_values=True), structure=_SIX)
    out = (labels == labels[0, 0, 0])[1:-1, 1:-1, 1:-1]
    occ[free & out] = OUTSIDE
    occ[free & ~out] = INSIDE
    grid.leaked = not np.any(occ == INSIDE)
    if grid.leaked:
        log.warning("flood fill leaked: no enclosed cells (is the mesh open?)")
    return grid


def voxelize_and_fill(mesh, resolution=DEFAULT_RESOLUTION, origin=None, cell_size=None):
    """Surface-mark the cells a mesh touches, then flood fill from the border.

    The default frame covers the normalized box [-0.5, 0.5]^3 plus a margin.
    """
    if resolution < 8:
        raise InvalidInputError("resolution must be at least 8")
    if origin is None or cell_size is None:
        origin, cell_size = default_frame(resolution)
    occ = mark_surface(mesh, resolution, origin, cell_size)
    grid = VoxelGrid(occ, np.asarray(origin, dtype=float), float(cell_size))
    return flood_fill(grid)


def extract_watertight(grid):
    """Closed, outward-oriented surface around the solid (inside + surface) cells."""
    solid = grid.solid()
    if not np.any(grid.occupancy == INSIDE):
        raise InvalidInputError("grid has no inside cells to contour")
    # outside = 1 so that marching cubes orients normals outward
    values = np.pad(np.where(solid, 0.0, 1.0), 1, constant_values=1.0)
    origin = grid.origin + 0.5 * grid.cell_size - grid.cell_size
    return marching_cubes(ScalarField(values, origin, grid.cell_size), 0.5)
