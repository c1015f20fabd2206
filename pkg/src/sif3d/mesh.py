"""Indexed triangle meshes, OBJ I/O and the normalization frame."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyMeshError, InvalidInputError, MeshParseError

log = logging.getLogger(__name__)


class TriangleMesh:
    __slots__ = ("vertices", "triangles")

    def __init__(self, vertices, triangles):
        vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise InvalidInputError("triangle index out of range")
        self.vertices = vertices
        self.triangles = triangles

    def __len__(self):
        return len(self.triangles)

    def __repr__(self):
        return f"TriangleMesh(vertices={len(self.vertices)}, triangles={len(self.triangles)})"

    @property
    def is_empty(self):
        return len(self.triangles) == 0

    def corners(self):
        """(T, 3, 3) array of triangle corner positions."""
        return self.vertices[self.triangles]

    def face_cross(self):
        v = self.corners()
        return np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def area(self):
        return float(self.face_areas().sum())

    def face_normals(self):
        n = self.face_cross()
        length = np.linalg.norm(n, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return n / length

    def bounds(self):
        if len(self.vertices) == 0:
            raise EmptyMeshError("mesh has no vertices")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def signed_volume(self):
        v = self.corners()
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)

    def edges(self):
        """Unique undirected edges and the number of faces using each."""
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0, return_counts=True)

    def euler_characteristic(self):
        used = np.unique(self.triangles)
        edges, _ = self.edges()
        return len(used) - len(edges) + len(self.triangles)

    def is_watertight(self):
        if self.is_empty:
            return False
        _, counts = self.edges()
        return bool(np.all(counts == 2))

    def compacted(self):
        """Drop unreferenced vertices, keeping the order of the rest."""
        used = np.unique(self.triangles)
        remap = np.full(len(self.vertices), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        return TriangleMesh(self.vertices[used], remap[self.triangles])

    def transformed(self, scale, offset):
        return TriangleMesh(self.vertices * scale + offset, self.triangles.copy())


def drop_degenerate(mesh):
    """Remove faces with repeated indices or zero area; return (mesh, dropped)."""
    t = mesh.triangles
    if len(t) == 0:
        return mesh, 0
    keep = (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])
    keep &= mesh.face_areas() > 0.0
    dropped = int((~keep).sum())
    return TriangleMesh(mesh.vertices, t[keep]), dropped


# -- OBJ ------------------------------------------------------------------------


def load_mesh(path):
    """Read the ``v`` / ``f`` subset of an OBJ file.

    Polygons are fan-triangulated and degenerate faces dropped with a
    logged warning.
    """
    path = Path(path)
    verts = []
    faces = []
    with path.open("r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshParseError("vertex record needs three coordinates", path, lineno)
                try:
                    verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError:
                    raise MeshParseError(f"bad vertex coordinate in {line!r}", path, lineno) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshParseError("face needs at least three vertices", path, lineno)
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/", 1)[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshParseError(f"bad face index {tok!r}", path, lineno) from None
                    if i < 1:
                        raise MeshParseError(f"face index {i} unsupported (1-based, non-negative only)", path, lineno)
                    if i > len(verts):
                        raise MeshParseError(f"face index {i} out of range ({len(verts)} vertices so far)", path, lineno)
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
    if not faces:
        raise EmptyMeshError(f"{path}: no faces")
    mesh, dropped = drop_degenerate(TriangleMesh(verts, faces))
    if dropped:
        log.warning("%s: dropped %d degenerate face(s)", path, dropped)
    if mesh.is_empty:
        raise EmptyMeshError(f"{path}: every face is degenerate")
    return mesh


def save_mesh(mesh, path):
    lines = ["v %r %r %r" % tuple(float(c) for c in v) for v in mesh.vertices]
    lines += ["f %d %d %d" % tuple(int(i) + 1 for i in t) for t in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


# -- normalization frame ------------------------------------------------------


@dataclass(frozen=True)
class NormalizeTransform:
    """``normalized = (original - center) * scale``."""

    center: tuple
    scale: float

    def apply(self, points):
        return (np.asarray(points, dtype=float) - np.asarray(self.center)) * self.scale

    def invert(self, points):
        return np.asarray(points, dtype=float) / self.scale + np.asarray(self.center)

    def to_dict(self):
        return {"center": [float(c) for c in self.center], "scale": float(self.scale)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(float(c) for c in d["center"]), float(d["scale"]))


def normalize_mesh(mesh):
    """Center the bounding box at the origin with its longest side of length 1."""
    if mesh.is_empty:
        raise EmptyMeshError("cannot normalize an empty mesh")
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if not extent > 0:
        raise InvalidInputError("mesh has zero extent")
    tr = NormalizeTransform(tuple(float(c) for c in (lo + hi) / 2), 1.0 / extent)
    return TriangleMesh(tr.apply(mesh.vertices), mesh.triangles.copy()), tr
