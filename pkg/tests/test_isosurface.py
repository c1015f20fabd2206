import math

import numpy as np
import pytest

from conftest import LEVEL_FACTOR, random_template
from sif3d.core import ShapeElement, Template, eval_element, eval_template
from sif3d.errors import InvalidInputError
from sif3d.isosurface import (
    ScalarField,
    accumulate_field,
    brute_force_field,
    extract,
    filter_components,
    influence_bounds,
    influence_half_width,
    marching_cubes,
)
from sif3d.mesh import TriangleMesh
from sif3d.synthetic import icosphere


def single(rho=0.15, center=(0.0, 0.0, 0.0)):
    return Template([-1.0], [center], [[rho] * 3])


def test_influence_factor_for_paper_epsilon():
    assert influence_half_width(1e-3) == pytest.approx(3.7169, abs=1e-4)


def test_influence_box_edges_have_epsilon_falloff():
    e = ShapeElement(-2.0, (0.1, 0.2, 0.3), (0.05, 0.1, 0.2))
    lo, hi = influence_bounds(e, 1e-3)
    for d in range(3):
        x = np.array(e.p)
        x[d] = hi[d]
        assert eval_element(e, x) / e.c == pytest.approx(1e-3, rel=1e-12)
    np.testing.assert_allclose((lo + hi) / 2, e.p)


def test_influence_limits():
    e = ShapeElement(-1.0, (0, 0, 0), (1, 1, 1))
    lo, hi = influence_bounds(e, 1 - 1e-15)
    assert np.max(hi - lo) < 1e-6
    assert np.allclose(hi - lo, (hi - lo)[0])
    with pytest.raises(InvalidInputError):
        influence_bounds(e, 0.0)
    with pytest.raises(InvalidInputError):
        influence_bounds(e, 1.0)


def test_full_accumulation_equals_brute_force():
    t = single(0.12, (0.05, -0.02, 0.01))
    a = accumulate_field(t, 32, epsilon=0.0)
    b = brute_force_field(t, 32)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-13, atol=1e-300)


def test_culled_accumulation_error_bound(rng):
    t = random_template(rng, 30)
    a = accumulate_field(t, 32, epsilon=1e-3)
    b = brute_force_field(t, 32)
    assert np.max(np.abs(a.values - b.values)) <= 30 * np.max(np.abs(t.constants)) * 1e-3


def test_far_element_contributes_nothing():
    t = Template([-1.0], [[5.0, 5.0, 5.0]], [[0.05] * 3])
    assert np.all(accumulate_field(t, 16).values == 0.0)


def test_field_is_negative_after_accumulation(rng):
    t = random_template(rng, 5, rmax=0.5)
    assert np.all(accumulate_field(t, 16, epsilon=0.0).values < 0)


def test_single_element_extracts_analytic_sphere():
    rho = 0.15
    m = extract(single(rho), 64)
    r = np.linalg.norm(m.vertices, axis=1)
    cell = 1.1 / 64
    assert abs(r.mean() - LEVEL_FACTOR * rho) < 1.5 * cell
    assert m.is_watertight() and m.euler_characteristic() == 2
    assert m.signed_volume() > 0


def test_vertices_lie_near_level_set():
    t = single(0.13, (0.01, 0.02, -0.03))
    res = 48
    m = extract(t, res)
    field = accumulate_field(t, res)
    # bound |F(v) - level| by the largest change of F across one cell
    lipschitz = np.max([np.max(np.abs(np.diff(field.values, axis=a))) for a in range(3)])
    assert np.max(np.abs(eval_template(t, m.vertices) - t.isolevel)) <= lipschitz


def test_level_error_shrinks_with_resolution():
    t = single(0.13)
    errs = [np.mean(np.abs(eval_template(t, extract(t, r).vertices) - t.isolevel)) for r in (32, 64, 128)]
    assert errs[0] > errs[1] > errs[2]


def test_no_crossing_gives_empty_mesh():
    f = ScalarField(np.full((5, 5, 5), -1.0), np.zeros(3), 0.1)
    assert marching_cubes(f, -0.07).is_empty
    f = ScalarField(np.zeros((5, 5, 5)), np.zeros(3), 0.1)
    assert marching_cubes(f, -0.07).is_empty


def test_marching_cubes_shares_vertices_and_orients_outward():
    # a planar ramp crossing the level: every vertex lies on x = 0.3 and
    # normals point toward increasing values (+x)
    x = np.linspace(0, 1, 5)
    vals = np.broadcast_to(x[:, None, None], (5, 5, 5)).copy()
    m = marching_cubes(ScalarField(vals, np.zeros(3), 0.25), 0.3)
    np.testing.assert_allclose(m.vertices[:, 0], 0.3)
    assert len(m.vertices) == 25
    assert np.all(m.face_normals()[:, 0] > 0.999)


def test_marching_cubes_is_deterministic():
    t = single(0.1)
    a = extract(t, 40)
    b = extract(t, 40)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.triangles, b.triangles)


def test_two_separate_spheres_give_two_components():
    t = Template([-1.0, -1.0], [[-0.25, 0, 0], [0.25, 0, 0]], [[0.08] * 3] * 2)
    m = extract(t, 64)
    assert m.is_watertight()
    assert m.euler_characteristic() == 4


def test_filter_components():
    big = icosphere(0.3, 2)
    speck = icosphere(0.01, 1, center=(0.45, 0.45, 0.45))
    both = TriangleMesh(np.vstack([big.vertices, speck.vertices]),
                        np.vstack([big.triangles, speck.triangles + len(big.vertices)]))
    kept = filter_components(both, 0.005)
    assert len(kept.triangles) == len(big.triangles)
    assert kept.area() == pytest.approx(big.area())
    assert filter_components(both, 0.0) is both
    assert filter_components(both, 100.0).is_empty


def test_extract_isolevel_override():
    t = single(0.1)
    inner = extract(t, 48, isolevel=-0.5)
    r = np.linalg.norm(inner.vertices, axis=1).mean()
    assert r == pytest.approx(0.1 * math.sqrt(2 * math.log(2)), abs=1.5 * 1.1 / 48)
