"""One check per acceptance criterion; each prints a single PASS/FAIL line."""
import time

import numpy as np
import pytest

from conftest import LEVEL_FACTOR, central_difference, random_template, rel_error
from sif3d.analysis import correspond, f_score, interpolate
from sif3d.cli import main
from sif3d.core import Template
from sif3d.isosurface import accumulate_field, brute_force_field, extract
from sif3d.losses import loss_total
from sif3d.mesh import save_mesh
from sif3d.query import MeshQuery
from sif3d.sampling import LabeledSamples, sample_near_surface, sample_surface
from sif3d.synthetic import box_mesh, icosphere
from sif3d.voxel import extract_watertight, voxelize_and_fill

BOX = (np.full(3, -0.5), np.full(3, 0.5))


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return emit


def test_criterion_1_gradient_matches_central_differences(report):
    t0 = time.perf_counter()
    worst = 0.0
    failures = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        t = random_template(rng, 10, spread=0.55)
        u = LabeledSamples(rng.uniform(-0.5, 0.5, (200, 3)), (rng.random(200) < 0.5).astype(np.uint8))
        s = LabeledSamples(rng.uniform(-0.5, 0.5, (200, 3)), (rng.random(200) < 0.5).astype(np.uint8))
        g = loss_total(t, u, s, BOX).grad
        fd = central_difference(
            lambda v: loss_total(Template.from_vector(v, t.isolevel), u, s, BOX).total, t.to_vector(), 1e-4)
        err = rel_error(g, fd)
        worst = max(worst, err)
        failures += err >= 1e-5
    dt = time.perf_counter() - t0
    report(1, failures == 0 and dt < 60,
           f"{100 - failures}/100 configs with rel err < 1e-5 (worst {worst:.2e}), {dt:.1f} s")


def test_criterion_2_level_set_radius(report):
    rho, res = 0.15, 128
    t0 = time.perf_counter()
    m = extract(Template([-1.0], [[0, 0, 0]], [[rho] * 3]), res)
    dt = time.perf_counter() - t0
    cell = 1.1 / res
    mean_r = float(np.linalg.norm(m.vertices, axis=1).mean())
    err_cells = abs(mean_r - 2.3062 * rho) / cell
    assert abs(LEVEL_FACTOR - 2.3062) < 1e-4
    report(2, err_cells <= 1.5 and dt < 10,
           f"mean radius {mean_r:.5f} vs {2.3062 * rho:.5f} ({err_cells:.3f} cells), {dt:.2f} s")


def test_criterion_3_culling_bound(report):
    t = random_template(np.random.default_rng(3), 100)
    t0 = time.perf_counter()
    culled = accumulate_field(t, 64, epsilon=1e-3)
    full = brute_force_field(t, 64)
    dt = time.perf_counter() - t0
    dev = float(np.max(np.abs(culled.values - full.values)))
    bound = 100 * float(np.max(np.abs(t.constants))) * 1e-3
    report(3, dev <= bound and dt < 30, f"max deviation {dev:.3e} <= bound {bound:.3e}, {dt:.2f} s")


def test_criterion_4_two_sphere_fit(report, diagonal_fit):
    acc, dt = diagonal_fit["accuracy"], diagonal_fit["seconds"]
    steps = diagonal_fit["trace"].final.step
    report(4, acc >= 0.99 and steps <= 5000 and dt < 60,
           f"accuracy {acc:.4f} after {steps} steps, {dt:.1f} s")


def test_criterion_5_near_surface_statistics(report):
    mesh = icosphere(0.4, 4)
    t0 = time.perf_counter()
    q = MeshQuery(mesh)
    surf = sample_surface(mesh, 100_000, 0)
    near = sample_near_surface(mesh, surf, 100_000, truncation=0.1, seed=1, query=q)
    dist = q.distance(near.points)
    dt = time.perf_counter() - t0
    frac = near.inside_fraction()
    within = float(np.mean(dist <= 0.1))
    report(5, abs(frac - 0.5) <= 0.01 and within == 1.0 and dt < 30,
           f"inside fraction {frac:.4f}, within truncation {within:.4%}, {dt:.1f} s")


def test_criterion_6_watertight_cube(report, cube_mesh):
    res = 64
    g = voxelize_and_fill(cube_mesh, res)
    frac = g.inside_fraction()
    lo, hi = (32 - 4) ** 3 / res ** 3, (32 + 4) ** 3 / res ** 3
    m = extract_watertight(g)
    chi = m.euler_characteristic()
    report(6, lo <= frac <= hi and m.is_watertight() and chi == 2,
           f"inside fraction {frac:.4f} in [{lo:.4f}, {hi:.4f}], watertight={m.is_watertight()}, chi={chi}")


def test_criterion_7_identities(report):
    rng = np.random.default_rng(7)
    t = random_template(rng, 10)
    other = random_template(rng, 10)
    mesh = icosphere(0.35, 2)
    cmap = correspond(mesh, t, mesh, t)
    identity = np.array_equal(cmap.dst_index, np.arange(len(mesh.vertices))) and np.all(cmap.distance == 0)
    mixed = interpolate([t, other], [1.0, 0.0])
    exact = all(np.array_equal(a, b) and a.tobytes() == b.tobytes() for a, b in
                ((mixed.constants, t.constants), (mixed.centers, t.centers), (mixed.radii, t.radii)))
    score = f"{f_score(mesh, mesh):.2f}"
    report(7, identity and exact and score == "100.00",
           f"self-correspondence identity={identity}, interpolation exact={exact}, f_score={score}")


def test_criterion_8_pipeline_determinism(report, tmp_path):
    save_mesh(box_mesh((-0.25,) * 3, (0.25,) * 3), tmp_path / "cube.obj")
    flags = ["--resolution", "64", "--count", "20000", "--elements", "16", "--steps", "300", "--res", "64"]
    for run in ("a", "b"):
        assert main(["--seed", "3", "pipeline", str(tmp_path / "cube.obj"), str(tmp_path / run)] + flags) == 0
    names = ["template.json", "template.trace.csv", "mesh.obj"]
    same = {n: (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names}
    report(8, all(same.values()), "byte-identical " + ", ".join(f"{n}={v}" for n, v in same.items()))
