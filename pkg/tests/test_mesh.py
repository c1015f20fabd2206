import logging

import numpy as np
import pytest

from sif3d.errors import EmptyMeshError, InvalidInputError, MeshParseError
from sif3d.mesh import NormalizeTransform, TriangleMesh, load_mesh, normalize_mesh, save_mesh
from sif3d.synthetic import box_mesh, icosphere, torus_mesh


def _write(tmp_path, text, name="m.obj"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_box_is_closed_outward_and_has_unit_volume():
    m = box_mesh()
    assert m.is_watertight()
    assert m.euler_characteristic() == 2
    assert m.signed_volume() == pytest.approx(1.0, rel=1e-15)
    assert m.area() == pytest.approx(6.0, rel=1e-15)


def test_torus_and_sphere_topology():
    assert torus_mesh().euler_characteristic() == 0
    s = icosphere(1.0, 2)
    assert s.is_watertight() and s.euler_characteristic() == 2
    assert s.signed_volume() > 0


def test_quads_are_fan_triangulated(tmp_path):
    v, quads = box_mesh(quads=True)
    text = "".join("v %r %r %r\n" % tuple(float(c) for c in p) for p in v)
    text += "".join("f " + " ".join(f"{i + 1}/{i + 1}/1" for i in q) + "\n" for q in quads)
    m = load_mesh(_write(tmp_path, "# box\nvn 0 0 1\n" + text))
    assert len(m.triangles) == 12
    assert m.is_watertight()
    assert m.signed_volume() == pytest.approx(1.0)


def test_save_load_roundtrip_is_exact(tmp_path):
    m = icosphere(0.37, 2, center=(0.1, -0.2, 0.3))
    p = tmp_path / "s.obj"
    save_mesh(m, p)
    back = load_mesh(p)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)


@pytest.mark.parametrize("body, line", [
    ("v 0 0 0\nv 1 0 0\nf 1 2 3\n", 3),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", 4),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -1 -2 -3\n", 4),
    ("v 0 0\n", 1),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n", 4),
    ("v 0 0 0\nv 1 0 0\nf 1 2\n", 3),
])
def test_parse_errors_name_file_and_line(tmp_path, body, line):
    p = _write(tmp_path, body)
    with pytest.raises(MeshParseError) as exc:
        load_mesh(p)
    assert exc.value.line == line
    assert str(p) in str(exc.value)


def test_no_faces_is_an_empty_mesh_error(tmp_path):
    with pytest.raises(EmptyMeshError):
        load_mesh(_write(tmp_path, "v 0 0 0\nv 1 0 0\n"))


def test_degenerate_faces_dropped_with_warning(tmp_path, caplog):
    body = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 3\nf 1 1 2\nf 1 2 4\n"
    with caplog.at_level(logging.WARNING):
        m = load_mesh(_write(tmp_path, body))
    assert len(m.triangles) == 1
    assert "dropped 2 degenerate" in caplog.text


def test_all_degenerate_is_empty(tmp_path):
    with pytest.raises(EmptyMeshError):
        load_mesh(_write(tmp_path, "v 0 0 0\nv 1 0 0\nf 1 2 2\n"))


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_mesh(tmp_path / "absent.obj")


def test_normalize_puts_longest_axis_on_unit_interval():
    m = box_mesh((1.0, 2.0, 3.0), (5.0, 4.0, 4.0))
    n, tr = normalize_mesh(m)
    lo, hi = n.bounds()
    np.testing.assert_allclose(lo, [-0.5, -0.25, -0.125])
    np.testing.assert_allclose(hi, [0.5, 0.25, 0.125])
    np.testing.assert_allclose(tr.invert(n.vertices), m.vertices, rtol=1e-15)


def test_normalize_rejects_zero_extent():
    with pytest.raises(InvalidInputError):
        normalize_mesh(TriangleMesh([[0, 0, 0]] * 3, [[0, 1, 2]]))


def test_transform_dict_roundtrip():
    tr = NormalizeTransform((0.1, 0.2, 0.3), 2.5)
    assert NormalizeTransform.from_dict(tr.to_dict()) == tr


def test_triangle_index_validation():
    with pytest.raises(InvalidInputError):
        TriangleMesh([[0, 0, 0]], [[0, 1, 2]])


def test_compacted_drops_unused_vertices():
    m = TriangleMesh([[9, 9, 9], [0, 0, 0], [1, 0, 0], [0, 1, 0]], [[1, 2, 3]])
    c = m.compacted()
    assert len(c.vertices) == 3
    np.testing.assert_array_equal(c.triangles, [[0, 1, 2]])
