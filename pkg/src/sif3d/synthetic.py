"""Analytic fixture shapes: closed meshes and sphere unions with exact labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriangleMesh
from .sampling import LabeledSamples


def box_mesh(lo=(-0.5, -0.5, -0.5), hi=(0.5, 0.5, 0.5), quads=False):
    """Axis-aligned box, outward winding. ``quads=True`` returns 6 quad faces."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    v = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    v = lo + v * (hi - lo)
    # vertex index = 4x + 2y + z
    q = [
        (0, 1, 3, 2),  # x = lo
        (4, 6, 7, 5),  # x = hi
        (0, 4, 5, 1),  # y = lo
        (2, 3, 7, 6),  # y = hi
        (0, 2, 6, 4),  # z = lo
        (1, 5, 7, 3),  # z = hi
    ]
    if quads:
        return v, q
    tris = []
    for a, b, c, d in q:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, tris)


def icosphere(radius=1.0, subdivisions=3, center=(0.0, 0.0, 0.0)):
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        nxt = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nxt
    return TriangleMesh(np.array(verts) * radius + np.asarray(center, dtype=float), faces)


def torus_mesh(major=0.3, minor=0.1, n_major=48, n_minor=24):
    u = np.arange(n_major) * 2 * np.pi / n_major
    v = np.arange(n_minor) * 2 * np.pi / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = (major + minor * np.cos(vv)) * np.cos(uu)
    y = (major + minor * np.cos(vv)) * np.sin(uu)
    z = minor * np.sin(vv)
    verts = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    tris = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, tris)


@dataclass(frozen=True)
class SphereUnion:
    """Union of balls; labels come straight from the distance test."""

    centers: tuple
    radii: tuple

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(tuple(float(v) for v in c) for c in self.centers))
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))

    def labels(self, points):
        points = np.asarray(points, dtype=float)
        inside = np.zeros(len(points), dtype=bool)
        for c, r in zip(self.centers, self.radii):
            inside |= np.sum((points - np.asarray(c)) ** 2, axis=1) <= r * r
        return (~inside).astype(np.uint8)

    def signed_distance(self, points):
        points = np.asarray(points, dtype=float)
        d = np.full(len(points), np.inf)
        for c, r in zip(self.centers, self.radii):
            d = np.minimum(d, np.linalg.norm(points - np.asarray(c), axis=1) - r)
        return d

    def bbox(self):
        c = np.asarray(self.centers)
        r = np.asarray(self.radii)[:, None]
        return (c - r).min(axis=0), (c + r).max(axis=0)

    def uniform_samples(self, bbox, count, seed):
        rng = np.random.default_rng(seed)
        lo, hi = (np.asarray(b, dtype=float) for b in bbox)
        pts = lo + rng.random((count, 3)) * (hi - lo)
        return LabeledSamples(pts, self.labels(pts))

    def near_surface_samples(self, count, truncation, seed):
        """Points offset along sphere normals with the 1/delta^2 magnitude law.

        Points falling inside another ball are discarded and redrawn.
        """
        rng = np.random.default_rng(seed)
        r = np.asarray(self.radii)
        area = r * r
        out = []
        have = 0
        dmin = truncation / 100.0
        while have < count:
            k = count - have
            which = rng.choice(len(r), size=k, p=area / area.sum())
            n = rng.normal(size=(k, 3))
            n /= np.linalg.norm(n, axis=1, keepdims=True)
            surf = np.asarray(self.centers)[which] + n * r[which, None]
            # keep only points on the exposed part of the union boundary
            exposed = np.abs(self.signed_distance(surf)) < 1e-9
            surf, n, which = surf[exposed], n[exposed], which[exposed]
            dmax = np.minimum(truncation, r[which])
            u = rng.random(len(surf))
            delta = 1.0 / (1.0 / dmin - u * (1.0 / dmin - 1.0 / dmax))
            side = np.where(rng.random(len(surf)) < 0.5, -1.0, 1.0)
            out.append(surf + (side * delta)[:, None] * n)
            have += len(surf)
        pts = np.concatenate(out)[:count]
        return LabeledSamples(pts, self.labels(pts))
