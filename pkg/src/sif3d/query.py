"""Ray casting, point containment and point-to-mesh distance.

The numba path walks a uniform grid of triangle bins (3D-DDA for rays,
shell-by-shell search for distances). The numpy path is a brute-force
sweep over every triangle, processed in chunks.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# fixed, irrationally-oriented directions keep parity rays off mesh edges
PARITY_DIRECTIONS = np.array([
    [0.5773502691896258, 0.4358898943540673, 0.6904346990607486],
    [-0.3090169943749474, 0.8090169943749475, 0.5000000000000001],
    [0.7071067811865476, -0.1411200080598672, -0.6927496693189063],
])
PARITY_DIRECTIONS /= np.linalg.norm(PARITY_DIRECTIONS, axis=1, keepdims=True)

_CHUNK_ELEMS = 2_000_000


# -- scalar helpers (numba-compiled when available) ------------------------


@njit
def _ray_triangle(ox, oy, oz, dx, dy, dz, tri):
    """Moller-Trumbore, two-sided. Returns t or inf."""
    e1x = tri[1, 0] - tri[0, 0]
    e1y = tri[1, 1] - tri[0, 1]
    e1z = tri[1, 2] - tri[0, 2]
    e2x = tri[2, 0] - tri[0, 0]
    e2y = tri[2, 1] - tri[0, 1]
    e2z = tri[2, 2] - tri[0, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if det == 0.0:
        return np.inf
    inv = 1.0 / det
    tx = ox - tri[0, 0]
    ty = oy - tri[0, 1]
    tz = oz - tri[0, 2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return np.inf
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf
    return (e2x * qx + e2y * qy + e2z * qz) * inv


@njit
def _segment_dist2(px, py, pz, ax, ay, az, bx, by, bz):
    ex = bx - ax
    ey = by - ay
    ez = bz - az
    wx = px - ax
    wy = py - ay
    wz = pz - az
    ll = ex * ex + ey * ey + ez * ez
    t = 0.0
    if ll > 0.0:
        t = (wx * ex + wy * ey + wz * ez) / ll
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    dx = wx - t * ex
    dy = wy - t * ey
    dz = wz - t * ez
    return dx * dx + dy * dy + dz * dz


@njit
def _point_triangle_dist2(px, py, pz, tri):
    ax = tri[0, 0]
    ay = tri[0, 1]
    az = tri[0, 2]
    e1x = tri[1, 0] - ax
    e1y = tri[1, 1] - ay
    e1z = tri[1, 2] - az
    e2x = tri[2, 0] - ax
    e2y = tri[2, 1] - ay
    e2z = tri[2, 2] - az
    nx = e1y * e2z - e1z * e2y
    ny = e1z * e2x - e1x * e2z
    nz = e1x * e2y - e1y * e2x
    nn = nx * nx + ny * ny + nz * nz
    wx = px - ax
    wy = py - ay
    wz = pz - az
    if nn > 0.0:
        # barycentrics of the projection onto the plane
        s = wx * nx + wy * ny + wz * nz
        c1x = wy * e2z - wz * e2y
        c1y = wz * e2x - wx * e2z
        c1z = wx * e2y - wy * e2x
        b1 = (c1x * nx + c1y * ny + c1z * nz) / nn
        c2x = e1y * wz - e1z * wy
        c2y = e1z * wx - e1x * wz
        c2z = e1x * wy - e1y * wx
        b2 = (c2x * nx + c2y * ny + c2z * nz) / nn
        if b1 >= 0.0 and b2 >= 0.0 and b1 + b2 <= 1.0:
            return s * s / nn
    d = _segment_dist2(px, py, pz, ax, ay, az, tri[1, 0], tri[1, 1], tri[1, 2])
    d = min(d, _segment_dist2(px, py, pz, tri[1, 0], tri[1, 1], tri[1, 2], tri[2, 0], tri[2, 1], tri[2, 2]))
    d = min(d, _segment_dist2(px, py, pz, tri[2, 0], tri[2, 1], tri[2, 2], ax, ay, az))
    return d


# -- grid kernels -----------------------------------------------------------


@njit
def _traverse(o, d, tmin, tmax, corners, cell_start, cell_tris, gmin, h, dims, count_mode):
    """Walk the cells pierced by one ray.

    count_mode=False returns the nearest hit t in [tmin, tmax] (inf if none);
    count_mode=True returns the number of hits with t > tmin.
    """
    t0 = tmin
    t1 = tmax
    for a in range(3):
        lo = gmin[a]
        hi = gmin[a] + h[a] * dims[a]
        if d[a] == 0.0:
            if o[a] < lo or o[a] > hi:
                return np.inf if not count_mode else 0.0
        else:
            ta = (lo - o[a]) / d[a]
            tb = (hi - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    if t0 > t1:
        return np.inf if not count_mode else 0.0
    idx = np.empty(3, dtype=np.int64)
    step = np.empty(3, dtype=np.int64)
    tnext = np.empty(3)
    tdelta = np.empty(3)
    for a in range(3):
        pa = o[a] + t0 * d[a]
        c = int(math.floor((pa - gmin[a]) / h[a]))
        if c < 0:
            c = 0
        if c > dims[a] - 1:
            c = dims[a] - 1
        idx[a] = c
        if d[a] > 0.0:
            step[a] = 1
            tnext[a] = (gmin[a] + (c + 1) * h[a] - o[a]) / d[a]
            tdelta[a] = h[a] / d[a]
        elif d[a] < 0.0:
            step[a] = -1
            tnext[a] = (gmin[a] + c * h[a] - o[a]) / d[a]
            tdelta[a] = -h[a] / d[a]
        else:
            step[a] = 0
            tnext[a] = np.inf
            tdelta[a] = np.inf
    best = np.inf
    hits = 0.0
    t_enter = t0
    while True:
        t_exit = min(tnext[0], min(tnext[1], tnext[2]))
        cell = (idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]
        for k in range(cell_start[cell], cell_start[cell + 1]):
            t = _ray_triangle(o[0], o[1], o[2], d[0], d[1], d[2], corners[cell_tris[k]])
            if count_mode:
                if t > tmin and t >= t_enter and t < t_exit and t <= tmax:
                    hits += 1.0
            elif t >= tmin and t <= tmax and t < best:
                best = t
        if not count_mode and best <= t_exit:
            return best
        if t_exit > t1:
            break
        a = 0
        if tnext[1] < tnext[a]:
            a = 1
        if tnext[2] < tnext[a]:
            a = 2
        idx[a] += step[a]
        if idx[a] < 0 or idx[a] >= dims[a]:
            break
        t_enter = tnext[a]
        tnext[a] += tdelta[a]
    if count_mode:
        return hits
    return best


@njit
def _first_hit_grid(origins, dirs, tmin, tmax, corners, cell_start, cell_tris, gmin, h, dims):
    out = np.empty(origins.shape[0])
    for i in range(origins.shape[0]):
        out[i] = _traverse(origins[i], dirs[i], tmin, tmax, corners, cell_start, cell_tris, gmin, h, dims, False)
    return out


@njit
def _count_hits_grid(origins, direction, tmin, corners, cell_start, cell_tris, gmin, h, dims):
    out = np.empty(origins.shape[0], dtype=np.int64)
    for i in range(origins.shape[0]):
        out[i] = int(_traverse(origins[i], direction, tmin, np.inf, corners, cell_start, cell_tris,
                               gmin, h, dims, True))
    return out


@njit
def _distance_grid(points, corners, cell_start, cell_tris, gmin, h, dims):
    out = np.empty(points.shape[0])
    hmin = min(h[0], min(h[1], h[2]))
    kmax = max(dims[0], max(dims[1], dims[2]))
    c0 = np.empty(3, dtype=np.int64)
    for i in range(points.shape[0]):
        for a in range(3):
            c = int(math.floor((points[i, a] - gmin[a]) / h[a]))
            c0[a] = min(max(c, 0), dims[a] - 1)
        best = np.inf
        for k in range(kmax + 1):
            for a in range(max(c0[0] - k, 0), min(c0[0] + k, dims[0] - 1) + 1):
                da = abs(a - c0[0])
                for b in range(max(c0[1] - k, 0), min(c0[1] + k, dims[1] - 1) + 1):
                    db = max(da, abs(b - c0[1]))
                    for c in range(max(c0[2] - k, 0), min(c0[2] + k, dims[2] - 1) + 1):
                        if max(db, abs(c - c0[2])) != k:
                            continue
                        cell = (a * dims[1] + b) * dims[2] + c
                        for s in range(cell_start[cell], cell_start[cell + 1]):
                            d2 = _point_triangle_dist2(points[i, 0], points[i, 1], points[i, 2],
                                                       corners[cell_tris[s]])
                            if d2 < best:
                                best = d2
            if best < np.inf and math.sqrt(best) <= k * hmin:
                break
        out[i] = math.sqrt(best)
    return out


# -- numpy brute force --------------------------------------------------------


def _mt_numpy(o, d, corners):
    """(m, T) hit distances, inf where the ray misses."""
    v0 = corners[None, :, 0]
    e1 = corners[None, :, 1] - v0
    e2 = corners[None, :, 2] - v0
    dd = d[:, None, :]
    p = np.cross(dd, e2)
    det = np.einsum("mtk,mtk->mt", e1, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        tv = o[:, None, :] - v0
        u = np.einsum("mtk,mtk->mt", tv, p) * inv
        q = np.cross(tv, e1)
        v = np.einsum("mtk,mtk->mt", dd, q) * inv
        t = np.einsum("mtk,mtk->mt", e2, q) * inv
        ok = (det != 0.0) & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1)
    return np.where(ok, t, np.inf)


def _rows_per_chunk(n_tri):
    return max(1, _CHUNK_ELEMS // max(n_tri, 1))


def _first_hit_numpy(origins, dirs, tmin, tmax, corners):
    out = np.empty(len(origins))
    step = _rows_per_chunk(len(corners))
    for s in range(0, len(origins), step):
        t = _mt_numpy(origins[s:s + step], dirs[s:s + step], corners)
        t = np.where((t >= tmin) & (t <= tmax), t, np.inf)
        out[s:s + step] = t.min(axis=1)
    return out


def _count_hits_numpy(origins, direction, tmin, corners):
    out = np.empty(len(origins), dtype=np.int64)
    step = _rows_per_chunk(len(corners))
    for s in range(0, len(origins), step):
        o = origins[s:s + step]
        t = _mt_numpy(o, np.broadcast_to(direction, o.shape), corners)
        out[s:s + step] = np.sum(np.isfinite(t) & (t > tmin), axis=1)
    return out


def _segment_dist2_numpy(p, a, b):
    e = b - a
    w = p - a
    ll = np.einsum("...k,...k->...", e, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(ll > 0, np.einsum("...k,...k->...", w, e) / ll, 0.0)
    t = np.clip(t, 0.0, 1.0)
    r = w - t[..., None] * e
    return np.einsum("...k,...k->...", r, r)


def _distance_numpy(points, corners):
    out = np.empty(len(points))
    step = _rows_per_chunk(len(corners))
    a = corners[None, :, 0]
    b = corners[None, :, 1]
    c = corners[None, :, 2]
    e1 = b - a
    e2 = c - a
    n = np.cross(e1, e2)
    nn = np.einsum("mtk,mtk->mt", n, n)
    for s in range(0, len(points), step):
        p = points[s:s + step, None, :]
        w = p - a
        sdist = np.einsum("mtk,mtk->mt", w, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            b1 = np.einsum("mtk,mtk->mt", np.cross(w, e2), n) / nn
            b2 = np.einsum("mtk,mtk->mt", np.cross(e1, w), n) / nn
            plane = sdist * sdist / nn
        inside = (nn > 0) & (b1 >= 0) & (b2 >= 0) & (b1 + b2 <= 1)
        edge = np.minimum(np.minimum(_segment_dist2_numpy(p, a, b), _segment_dist2_numpy(p, b, c)),
                          _segment_dist2_numpy(p, c, a))
        d2 = np.where(inside, plane, edge)
        out[s:s + step] = np.sqrt(d2.min(axis=1))
    return out


# -- public --------------------------------------------------------------------


class MeshQuery:
    """Spatial queries against a fixed triangle mesh."""

    def __init__(self, mesh, cells_per_triangle=2.0, use_numba=None):
        self.mesh = mesh
        self.corners = np.ascontiguousarray(mesh.corners(), dtype=float)
        self.use_numba = USE_NUMBA if use_numba is None else bool(use_numba)
        if self.use_numba:
            self._build_grid(cells_per_triangle)

    def _build_grid(self, cells_per_triangle):
        corners = self.corners
        lo = corners.min(axis=(0, 1))
        hi = corners.max(axis=(0, 1))
        span = hi - lo
        pad = 1e-9 * max(float(span.max()), 1e-12) + 1e-12
        lo = lo - pad
        hi = hi + pad
        span = hi - lo
        target = max(cells_per_triangle * len(corners), 1.0)
        # size cells so that the grid holds about `target` cells
        vol = float(np.prod(np.maximum(span, span.max() * 1e-3)))
        h = (vol / target) ** (1.0 / 3.0)
        dims = np.clip(np.ceil(span / h), 1, 256).astype(np.int64)
        h = span / dims
        tlo = np.clip(np.floor((corners.min(axis=1) - lo) / h), 0, dims - 1).astype(np.int64)
        thi = np.clip(np.floor((corners.max(axis=1) - lo) / h), 0, dims - 1).astype(np.int64)
        ext = thi - tlo + 1
        counts = ext.prod(axis=1)
        tri = np.repeat(np.arange(len(corners)), counts)
        start = np.repeat(np.cumsum(counts) - counts, counts)
        off = np.arange(counts.sum()) - start
        ny = ext[tri, 1]
        nz = ext[tri, 2]
        cz = off % nz
        cy = (off // nz) % ny
        cx = off // (nz * ny)
        cell = ((tlo[tri, 0] + cx) * dims[1] + (tlo[tri, 1] + cy)) * dims[2] + (tlo[tri, 2] + cz)
        order = np.argsort(cell, kind="stable")
        ncell = int(dims.prod())
        self.cell_tris = tri[order].astype(np.int64)
        self.cell_start = np.zeros(ncell + 1, dtype=np.int64)
        np.cumsum(np.bincount(cell, minlength=ncell), out=self.cell_start[1:])
        self.grid_min = lo
        self.cell_size = h
        self.dims = dims

    def _grid_args(self):
        return self.corners, self.cell_start, self.cell_tris, self.grid_min, self.cell_size, self.dims

    def first_hit(self, origins, dirs, tmin=1e-9, tmax=np.inf):
        """Distance along each ray to the nearest hit, inf on a miss."""
        origins = np.ascontiguousarray(origins, dtype=float).reshape(-1, 3)
        dirs = np.ascontiguousarray(np.broadcast_to(np.asarray(dirs, dtype=float), origins.shape))
        if self.use_numba:
            return _first_hit_grid(origins, dirs, float(tmin), float(tmax), *self._grid_args())
        return _first_hit_numpy(origins, dirs, tmin, tmax, self.corners)

    def count_hits(self, origins, direction, tmin=0.0):
        origins = np.ascontiguousarray(origins, dtype=float).reshape(-1, 3)
        direction = np.ascontiguousarray(direction, dtype=float)
        if self.use_numba:
            return _count_hits_grid(origins, direction, float(tmin), *self._grid_args())
        return _count_hits_numpy(origins, direction, tmin, self.corners)

    def contains(self, points):
        """Ray-parity inside test, majority vote over three fixed directions."""
        points = np.ascontiguousarray(points, dtype=float).reshape(-1, 3)
        votes = np.zeros(len(points), dtype=np.int64)
        for d in PARITY_DIRECTIONS:
            votes += self.count_hits(points, d) % 2
        return votes >= 2

    def distance(self, points):
        """Unsigned Euclidean distance from each point to the mesh surface."""
        points = np.ascontiguousarray(points, dtype=float).reshape(-1, 3)
        if self.use_numba:
            return _distance_grid(points, *self._grid_args())
        return _distance_numpy(points, self.corners)
