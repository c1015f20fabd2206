import numpy as np
import pytest
from scipy.spatial.distance import cdist

from conftest import random_template
from sif3d.analysis import (
    CorrespondenceMap,
    correspond,
    f_score,
    f_score_detail,
    interpolate,
    template_coordinates,
)
from sif3d.core import Template, eval_template
from sif3d.errors import InvalidInputError, ParseError
from sif3d.isosurface import extract
from sif3d.mesh import TriangleMesh
from sif3d.sampling import sample_surface
from sif3d.synthetic import box_mesh, icosphere


def test_coordinates_at_center_are_zero_with_constant_magnitude(rng):
    t = random_template(rng, 4)
    tc = template_coordinates(t, t.centers[2])
    np.testing.assert_array_equal(tc.vectors[0, 2], 0.0)
    assert tc.magnitudes[0, 2] == -t.constants[2]


def test_coordinates_along_axis_point_along_axis():
    t = Template([-1.0], [[0.1, 0.0, 0.0]], [[0.2] * 3])
    v = template_coordinates(t, (0.3, 0.0, 0.0)).vectors[0, 0]
    assert v[0] > 0 and v[1] == 0 and v[2] == 0


def test_coordinate_length_equals_element_influence(rng):
    t = random_template(rng, 5)
    x = rng.uniform(-0.5, 0.5, (20, 3))
    tc = template_coordinates(t, x)
    np.testing.assert_allclose(np.linalg.norm(tc.vectors, axis=2), tc.magnitudes, rtol=1e-12)
    d = (x[:, None] - t.centers[None]) / t.radii[None]
    np.testing.assert_allclose(tc.magnitudes, -t.constants * np.exp(-0.5 * np.sum(d * d, axis=2)), rtol=1e-12)


def test_field_magnitude_mode(rng):
    t = random_template(rng, 3)
    x = rng.uniform(-0.3, 0.3, (4, 3))
    tc = template_coordinates(t, x, magnitude="field")
    np.testing.assert_allclose(tc.magnitudes, np.abs(eval_template(t, x))[:, None].repeat(3, 1), rtol=1e-12)
    with pytest.raises(InvalidInputError):
        template_coordinates(t, x, magnitude="other")


def test_magnitudes_decay_along_a_ray(rng):
    t = random_template(rng, 1)
    ray = t.centers[0] + np.linspace(0, 0.5, 50)[:, None] * np.array([0.6, 0.0, 0.8])
    assert np.all(np.diff(template_coordinates(t, ray).magnitudes[:, 0]) < 0)


def test_coordinates_translation_equivariant(rng):
    t = random_template(rng, 4)
    x = rng.uniform(-0.4, 0.4, (10, 3))
    off = np.array([0.3, -0.1, 0.2])
    a = template_coordinates(t, x).vectors
    b = template_coordinates(t.translated(off), x + off).vectors
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


@pytest.fixture(scope="module")
def pair_mesh():
    t = Template([-1.0] * 4, [[-0.25, 0, 0], [-0.2, 0.05, 0], [0.25, 0, 0], [0.3, 0, 0.05]], [[0.08] * 3] * 4)
    return t, extract(t, 40)


def test_self_correspondence_is_identity(pair_mesh):
    t, m = pair_mesh
    cm = correspond(m, t, m, t)
    np.testing.assert_array_equal(cm.dst_index, np.arange(len(m.vertices)))
    assert np.all(cm.distance == 0.0)


def test_translated_correspondence_is_identity(pair_mesh):
    t, m = pair_mesh
    off = np.array([0.05, 0.02, -0.03])
    cm = correspond(m, t, m.transformed(1.0, off), t.translated(off))
    np.testing.assert_array_equal(cm.dst_index, np.arange(len(m.vertices)))


def test_moved_sphere_maps_to_matching_component(pair_mesh):
    t, m = pair_mesh
    # move the +x sphere (elements 2 and 3) up; the -x sphere stays
    moved = Template(t.constants, t.centers + np.array([[0, 0, 0], [0, 0, 0], [0, 0.1, 0], [0, 0.1, 0]]), t.radii)
    dst = extract(moved, 40)
    cm = correspond(m, t, dst, moved)
    src_side = m.vertices[:, 0] > 0
    dst_side = dst.vertices[cm.dst_index, 0] > 0
    np.testing.assert_array_equal(src_side, dst_side)
    assert np.all((cm.distance >= 0) & (cm.distance <= 2))


def test_ties_go_to_lowest_index():
    t = Template([-1.0], [[0, 0, 0]], [[0.2] * 3])
    # duplicated destination vertices are exact ties
    m = box_mesh((-0.1,) * 3, (0.1,) * 3)
    dup = TriangleMesh(np.vstack([m.vertices, m.vertices]), m.triangles)
    cm = correspond(m, t, dup, t)
    np.testing.assert_array_equal(cm.dst_index, np.arange(8))


def test_correspondence_requires_equal_element_count(pair_mesh):
    t, m = pair_mesh
    with pytest.raises(InvalidInputError):
        correspond(m, t, m, Template([-1.0], [[0, 0, 0]], [[1, 1, 1]]))


def test_correspondence_csv(tmp_path):
    cm = CorrespondenceMap(np.array([2, 0, 1]), np.array([0.0, 1e-17, 0.5]))
    cm.write_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[:2] == ["src_index,dst_index,cos_distance", "0,2,0.0"]
    back = CorrespondenceMap.read_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.dst_index, cm.dst_index)
    np.testing.assert_array_equal(back.distance, cm.distance)
    (tmp_path / "bad.csv").write_text("src_index,dst_index,cos_distance\n1,0,0.0\n")
    with pytest.raises(ParseError):
        CorrespondenceMap.read_csv(tmp_path / "bad.csv")


def test_interpolation_endpoint_is_exact(rng):
    a, b = random_template(rng, 6), random_template(rng, 6)
    assert interpolate([a, b], [1, 0]) == a
    assert interpolate([a, b], [0.0, 1.0]) == b


def test_interpolating_copies_returns_the_template(rng):
    a = random_template(rng, 6)
    mid = interpolate([a, a], [0.5, 0.5])
    np.testing.assert_allclose(mid.to_vector(), a.to_vector(), rtol=1e-15)


def test_log_space_blend_gives_geometric_mean_radius():
    small = Template([-1.0], [[0, 0, 0]], [[0.05] * 3])
    large = Template([-1.0], [[0, 0, 0]], [[0.2] * 3])
    mid = interpolate([small, large], [0.5, 0.5])
    np.testing.assert_allclose(mid.radii, 0.1, rtol=1e-14)
    assert mid.constants[0] == pytest.approx(-1.0, rel=1e-15)


def test_interpolation_validation(rng):
    a, b = random_template(rng, 2), random_template(rng, 3)
    with pytest.raises(InvalidInputError):
        interpolate([a, b], [0.5, 0.5])
    with pytest.raises(InvalidInputError):
        interpolate([a, a], [0.6, 0.6])
    with pytest.raises(InvalidInputError):
        interpolate([a, a], [1.5, -0.5])
    with pytest.raises(InvalidInputError):
        interpolate([a, a], [1.0])


def test_f_score_identical_and_disjoint():
    s = icosphere(0.3, 3)
    assert f_score(s, s, sample_count=20000) == 100.0
    far = s.transformed(1.0, np.array([2.0, 0, 0]))
    assert f_score(s, far, sample_count=20000) == 0.0


def test_f_score_matches_brute_force_oracle():
    # offset by exactly the distance threshold: many samples sit on the boundary
    a = icosphere(0.3, 3)
    b = a.transformed(1.0, np.array([0.01, 0.0, 0.0]))
    n = 3000
    detail = f_score_detail(a, b, tau=1e-4, sample_count=n, seed=5)
    pa = sample_surface(a, n, 5).points
    pb = sample_surface(b, n, 5).points
    d = cdist(pa, pb)
    precision = np.mean(d.min(axis=1) <= 0.01)
    recall = np.mean(d.min(axis=0) <= 0.01)
    assert detail.precision == precision and detail.recall == recall
    assert 20.0 < detail.fscore < 80.0


def test_f_score_swap_symmetry():
    a = icosphere(0.3, 3)
    b = icosphere(0.31, 3)
    x = f_score_detail(a, b, sample_count=5000)
    y = f_score_detail(b, a, sample_count=5000)
    assert (x.precision, x.recall) == (y.recall, y.precision)
    assert x.fscore == pytest.approx(y.fscore, rel=1e-15)


def test_f_score_tau_convention():
    a = icosphere(0.3, 3)
    b = a.transformed(1.0, np.array([0.05, 0.0, 0.0]))
    # tau as squared distance 0.0025 equals plain distance 0.05
    assert f_score(a, b, tau=0.0025, sample_count=3000) == f_score(a, b, tau=0.05, sample_count=3000, squared=False)
    with pytest.raises(InvalidInputError):
        f_score(a, b, tau=0.0)
