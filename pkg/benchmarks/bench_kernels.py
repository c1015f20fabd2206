"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]

Both implementations are called directly, so the SIF3D_DISABLE_NUMBA
switch does not matter here. Numba timings exclude the first (compiling)
call. Each row also reports the max absolute difference between backends.
"""

import argparse
import statistics
import time

import numpy as np

from sif3d import _field_kernels as fk
from sif3d import voxel
from sif3d.isosurface import grid_for, influence_half_width
from sif3d.query import MeshQuery
from sif3d.synthetic import icosphere


def _time(fn, repeat):
    out = fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def _template(n, rng):
    consts = -np.exp(rng.normal(0.0, 0.5, n))
    centers = rng.uniform(-0.4, 0.4, (n, 3))
    radii = rng.uniform(0.03, 0.12, (n, 3))
    return consts, centers, radii


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    same = a == b  # covers matching infinities (missed rays)
    with np.errstate(invalid="ignore"):
        return float(np.max(np.where(same, 0.0, np.abs(a - b)), initial=0.0))


def cases(quick):
    rng = np.random.default_rng(0)
    n = 100
    consts, centers, radii = _template(n, rng)
    m = 6000
    pts = rng.uniform(-0.5, 0.5, (m, 3))
    labels = (rng.random(m) < 0.3).astype(np.uint8)
    res = 48 if quick else 96
    origin, cell, shape = grid_for(res)
    shape = np.asarray(shape, dtype=np.int64)
    hw = influence_half_width(1e-3)

    yield ("field_values N=100 M=6000",
           lambda: fk._values_numba(pts, consts, centers, radii),
           lambda: fk._values_numpy(pts, consts, centers, radii))
    yield ("classification loss+grad N=100 M=6000",
           lambda: fk._classification_numba(pts, labels, consts, centers, radii, 100.0, 10.0, -0.07),
           lambda: fk._classification_numpy(pts, labels, consts, centers, radii, 100.0, 10.0, -0.07))
    yield (f"accumulate res={res} N=100",
           lambda: fk._accumulate_numba(consts, centers, radii, origin, cell, shape, hw),
           lambda: fk._accumulate_numpy(consts, centers, radii, origin, cell, shape, hw))

    sphere = icosphere(0.4, 3 if quick else 4)
    q_fast = MeshQuery(sphere, use_numba=True)
    q_slow = MeshQuery(sphere, use_numba=False)
    k = 500 if quick else 2000
    qp = rng.uniform(-0.5, 0.5, (k, 3))
    dirs = rng.normal(size=(k, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    yield (f"first_hit {len(sphere.triangles)} tris, {k} rays",
           lambda: q_fast.first_hit(qp, dirs), lambda: q_slow.first_hit(qp, dirs))
    yield (f"contains {len(sphere.triangles)} tris, {k} points",
           lambda: q_fast.contains(qp), lambda: q_slow.contains(qp))
    yield (f"distance {len(sphere.triangles)} tris, {k} points",
           lambda: q_fast.distance(qp), lambda: q_slow.distance(qp))

    vres = 32 if quick else 64
    corners = np.ascontiguousarray(sphere.corners())
    vorigin, vcell = voxel.default_frame(vres)

    def vox(impl):
        occ = np.full((vres,) * 3, voxel.UNKNOWN, dtype=np.uint8)
        impl(corners, vorigin, vcell, vres, occ)
        return occ

    yield (f"voxelize res={vres}", lambda: vox(voxel._voxelize_numba), lambda: vox(voxel._voxelize_numpy))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args()
    print(f"{'kernel':44s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fast, slow in cases(args.quick):
        t_fast, a = _time(fast, args.repeat)
        t_slow, b = _time(slow, max(1, args.repeat // 2))
        print(f"{name:44s} {1e3 * t_fast:10.2f} {1e3 * t_slow:10.2f} {t_slow / t_fast:8.1f} {_diff(a, b):11.2e}")


if __name__ == "__main__":
    main()
