"""Labeled point samples: uniform, surface and near-surface, plus file I/O.

Labels follow the 0 = inside, 1 = outside convention throughout.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyMeshError, InvalidInputError, NumericalError, ParseError
from .query import MeshQuery

log = logging.getLogger(__name__)

MAGIC = b"SIFS"
SAMPLE_FILE_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
LABELED_DTYPE = np.dtype([("x", "<f4", (3,)), ("label", "u1")])
SURFACE_DTYPE = np.dtype([("x", "<f4", (3,)), ("n", "<f4", (3,))])


@dataclass(frozen=True)
class LabeledSamples:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        lab = np.asarray(self.labels).reshape(-1).astype(np.uint8)
        if len(pts) != len(lab):
            raise InvalidInputError("points and labels differ in length")
        if lab.size and lab.max() > 1:
            raise InvalidInputError("labels must be 0 (inside) or 1 (outside)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return len(self.labels)

    def take(self, idx):
        return LabeledSamples(self.points[idx], self.labels[idx])

    def inside_fraction(self):
        return float(np.mean(self.labels == 0)) if len(self) else 0.0


@dataclass(frozen=True)
class SurfaceSamples:
    points: np.ndarray
    normals: np.ndarray
    faces: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        nrm = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        if len(pts) != len(nrm):
            raise InvalidInputError("points and normals differ in length")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm)

    def __len__(self):
        return len(self.points)


# -- samplers ------------------------------------------------------------------


def sample_uniform(grid, bbox, count, seed):
    """Uniform points in ``bbox`` labeled by the voxel that contains them."""
    lo, hi = (np.asarray(b, dtype=float) for b in bbox)
    rng = np.random.default_rng(seed)
    pts = lo + rng.random((int(count), 3)) * (hi - lo)
    return LabeledSamples(pts, grid.label_at(pts))


def sample_surface(mesh, count, seed):
    """Area-weighted surface points with the outward face normal of their triangle."""
    areas = mesh.face_areas()
    total = float(areas.sum())
    if not total > 0:
        raise EmptyMeshError("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(areas)
    faces = np.searchsorted(cum, rng.random(int(count)) * cum[-1], side="right")
    faces = np.minimum(faces, len(areas) - 1)
    # folding the unit square onto the triangle keeps the density uniform
    uv = rng.random((int(count), 2))
    flip = uv.sum(axis=1) > 1.0
    uv[flip] = 1.0 - uv[flip]
    tri = mesh.corners()[faces]
    pts = tri[:, 0] + uv[:, :1] * (tri[:, 1] - tri[:, 0]) + uv[:, 1:] * (tri[:, 2] - tri[:, 0])
    normals = mesh.face_normals()[faces]
    return SurfaceSamples(pts, normals, faces)


def _inverse_square_offsets(u, lo, hi):
    """Inverse CDF of density proportional to 1/delta^2 on (lo, hi)."""
    return 1.0 / (1.0 / lo - u * (1.0 / lo - 1.0 / hi))


def sample_near_surface(mesh, surface, count, truncation=0.1, seed=0, query=None, max_rounds=20):
    """Points in a band around the surface, equally split between the two sides.

    Each draw picks a surface sample, casts rays along both normal
    directions, caps the offset at the nearer hit (and at ``truncation``)
    and draws the offset magnitude with density proportional to 1/delta^2.
    Labels come from the ray-parity test against ``mesh``.
    """
    if not truncation > 0:
        raise InvalidInputError("truncation must be positive")
    count = int(count)
    if count == 0:
        return LabeledSamples(np.zeros((0, 3)), np.zeros(0, dtype=np.uint8))
    if len(surface) == 0:
        raise InvalidInputError("no surface samples to start from")
    query = query or MeshQuery(mesh)
    rng = np.random.default_rng(seed)
    dmin = truncation / 100.0
    tmin = 1e-7
    chunks = []
    have = 0
    for _ in range(max_rounds):
        k = count - have
        pick = rng.integers(0, len(surface), size=k)
        side = np.where(rng.random(k) < 0.5, -1.0, 1.0)
        u = rng.random(k)
        x = surface.points[pick]
        n = surface.normals[pick]
        t_pos = query.first_hit(x, n, tmin=tmin)
        t_neg = query.first_hit(x, -n, tmin=tmin)
        t = np.minimum(t_pos, t_neg)
        ok = np.isfinite(t)
        cap = np.minimum(t[ok], truncation)
        lo = np.minimum(dmin, 0.5 * cap)
        delta = _inverse_square_offsets(u[ok], lo, cap)
        chunks.append(x[ok] + (side[ok] * delta)[:, None] * n[ok])
        have += int(ok.sum())
        if have >= count:
            break
        log.debug("near-surface sampler: %d rays missed both ways, redrawing", k - int(ok.sum()))
    else:
        raise NumericalError(f"near-surface sampler gave up with {have}/{count} points")
    pts = np.concatenate(chunks)[:count]
    labels = np.where(query.contains(pts), 0, 1).astype(np.uint8)
    return LabeledSamples(pts, labels)


# -- files -------------------------------------------------------------------


def write_samples(samples, path, text=False):
    path = Path(path)
    if isinstance(samples, SurfaceSamples):
        if text:
            rows = np.hstack([samples.points, samples.normals]).astype(np.float32)
            path.write_text("".join(" ".join("%.9g" % v for v in r) + "\n" for r in rows))
            return
        rec = np.empty(len(samples), dtype=SURFACE_DTYPE)
        rec["x"] = samples.points
        rec["n"] = samples.normals
    else:
        if text:
            pts = samples.points.astype(np.float32)
            path.write_text("".join(
                "%.9g %.9g %.9g %d\n" % (p[0], p[1], p[2], l) for p, l in zip(pts, samples.labels)
            ))
            return
        rec = np.empty(len(samples), dtype=LABELED_DTYPE)
        rec["x"] = samples.points
        rec["label"] = samples.labels
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, SAMPLE_FILE_VERSION, len(rec)))
        fh.write(rec.tobytes())


def _surface_from(pts, nrm):
    nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    return SurfaceSamples(pts, nrm)


def read_samples(path, text=False):
    """Load a sample file; the record kind is inferred from its layout."""
    path = Path(path)
    if text:
        rows = [ln.split() for ln in path.read_text().splitlines() if ln.strip()]
        if not rows:
            return LabeledSamples(np.zeros((0, 3)), np.zeros(0, dtype=np.uint8))
        width = {len(r) for r in rows}
        if width == {4}:
            arr = np.array(rows, dtype=float)
            return LabeledSamples(arr[:, :3], arr[:, 3].astype(np.uint8))
        if width == {6}:
            arr = np.array(rows, dtype=float)
            return _surface_from(arr[:, :3], arr[:, 3:])
        raise ParseError(f"{path}: inconsistent text sample records")
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise ParseError(f"{path}: truncated sample header")
    magic, version, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if version != SAMPLE_FILE_VERSION:
        raise ParseError(f"{path}: unsupported sample file version {version}")
    body = memoryview(data)[_HEADER.size:]
    if count == 0:
        if len(body):
            raise ParseError(f"{path}: trailing bytes after empty sample set")
        return LabeledSamples(np.zeros((0, 3)), np.zeros(0, dtype=np.uint8))
    if len(body) == count * LABELED_DTYPE.itemsize:
        rec = np.frombuffer(body, dtype=LABELED_DTYPE)
        return LabeledSamples(rec["x"].astype(float), rec["label"])
    if len(body) == count * SURFACE_DTYPE.itemsize:
        rec = np.frombuffer(body, dtype=SURFACE_DTYPE)
        return _surface_from(rec["x"].astype(float), rec["n"].astype(float))
    raise ParseError(f"{path}: body size {len(body)} does not match {count} records")
