import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dentalmarks.errors import (
    LengthMismatch,
    MalformedGeometry,
    UnreadableFile,
    UnsupportedFormat,
)
from dentalmarks.fixtures import icosphere
from dentalmarks.mesh import (
    LandmarkClass,
    LandmarkSet,
    TriangleMesh,
    compute_vertex_normals,
    heatmap_colors,
    load_mesh,
    save_heatmap_ply,
    save_mesh,
)

from helpers import random_mesh


def _binary_stl(tris):
    body = b"".join(
        struct.pack("<3f", 0, 0, 0) + struct.pack("<9f", *np.ravel(t)) + b"\0\0" for t in tris
    )
    return b"\0" * 80 + struct.pack("<I", len(tris)) + body


def test_landmark_classes_fixed_order():
    assert [c.name for c in LandmarkClass] == ["Mesial", "Distal", "Cusp", "Inner", "Outer", "Facial"]
    assert [int(c) for c in LandmarkClass] == list(range(6))


def test_obj_single_triangle(tmp_path):
    p = tmp_path / "t.obj"
    p.write_text("# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1/1 2/1/1 3/1/1\n")
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces) == (3, 1)
    assert m.adjacency == [[1, 2], [0, 2], [0, 1]]


def test_obj_index_out_of_range(tmp_path):
    p = tmp_path / "bad.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n")
    with pytest.raises(MalformedGeometry):
        load_mesh(p)


def test_degenerate_face_rejected():
    with pytest.raises(MalformedGeometry):
        TriangleMesh(np.eye(3), [[0, 1, 1]])


def test_missing_file_and_unknown_format(tmp_path):
    with pytest.raises(UnreadableFile):
        load_mesh(tmp_path / "nope.obj")
    with pytest.raises(UnsupportedFormat):
        load_mesh(tmp_path / "x.off", format="off")


def test_binary_stl_dedup(tmp_path):
    a, b, c, d = [0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]
    p = tmp_path / "two.stl"
    p.write_bytes(_binary_stl([[a, b, c], [b, d, c]]))
    m = load_mesh(p)
    # four distinct coordinate triples among six corners
    assert (m.n_vertices, m.n_faces) == (4, 2)
    assert m.adjacency[1] == [0, 2, 3]


def test_ascii_stl(tmp_path):
    p = tmp_path / "a.stl"
    p.write_text(
        "solid x\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\n"
        "endloop\nendfacet\nfacet normal 0 0 1\nouter loop\nvertex 1 0 0\nvertex 1 1 0\n"
        "vertex 0 1 0\nendloop\nendfacet\nendsolid x\n"
    )
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces) == (4, 2)


def test_binary_ply(tmp_path):
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype="<f4")
    header = (
        "ply\nformat binary_little_endian 1.0\nelement vertex 4\nproperty float x\n"
        "property float y\nproperty float z\nelement face 2\n"
        "property list uchar int vertex_indices\nend_header\n"
    ).encode()
    faces = b"".join(struct.pack("<B3i", 3, *f) for f in [(0, 1, 2), (1, 3, 2)])
    p = tmp_path / "b.ply"
    p.write_bytes(header + verts.tobytes() + faces)
    m = load_mesh(p)
    np.testing.assert_array_equal(m.vertices, verts)
    np.testing.assert_array_equal(m.faces, [[0, 1, 2], [1, 3, 2]])


@pytest.mark.parametrize("ext", ["obj", "ply", "stl"])
def test_roundtrip(tmp_path, ext):
    rng = np.random.default_rng(3)
    m = random_mesh(rng, 40)
    p1, p2 = tmp_path / f"a.{ext}", tmp_path / f"b.{ext}"
    save_mesh(m, p1)
    m1 = load_mesh(p1)
    save_mesh(m1, p2)
    m2 = load_mesh(p2)
    np.testing.assert_array_equal(m1.vertices, m2.vertices)
    np.testing.assert_array_equal(m1.faces, m2.faces)
    if ext != "stl":
        np.testing.assert_array_equal(m1.faces, m.faces)
        np.testing.assert_allclose(m1.vertices, m.vertices, rtol=1e-8)


def test_adjacency_independent_of_face_order():
    rng = np.random.default_rng(0)
    m = random_mesh(rng, 30)
    perm = rng.permutation(m.n_faces)
    rolled = np.roll(m.faces[perm], 1, axis=1)
    m2 = TriangleMesh(m.vertices, rolled)
    assert m.adjacency == m2.adjacency
    for i, nb in enumerate(m.adjacency):
        assert nb == sorted(nb)
        for j in nb:
            assert i in m.adjacency[j]


def test_normals_planar_triangle():
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    np.testing.assert_allclose(compute_vertex_normals(m), [[0, 0, 1]] * 3)


def test_normals_icosphere_radial():
    m = icosphere(3)
    n = compute_vertex_normals(m)
    radial = m.vertices / np.linalg.norm(m.vertices, axis=1, keepdims=True)
    assert (np.einsum("ij,ij->i", n, radial) > 0.99).all()
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-6)


def test_isolated_vertex_fallback_normal():
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 2, 1]])
    n = m.normals
    np.testing.assert_allclose(n[3], [0, 0, 1])
    np.testing.assert_allclose(n[0], [0, 0, -1])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_normals_invariant_to_face_permutation(seed):
    rng = np.random.default_rng(seed)
    m = random_mesh(rng, int(rng.integers(4, 40)))
    m2 = TriangleMesh(m.vertices, m.faces[rng.permutation(m.n_faces)])
    np.testing.assert_array_equal(m.normals, m2.normals)


def test_heatmap_endpoints_and_constant(tmp_path):
    np.testing.assert_array_equal(heatmap_colors([0.0, 1.0]), [[0, 0, 255], [255, 0, 0]])
    const = heatmap_colors([3.0, 3.0, 3.0])
    assert (const == const[0]).all()
    assert tuple(const[0]) == (128, 0, 127)


def test_heatmap_ply_roundtrip(tmp_path):
    m = icosphere(1)
    p = tmp_path / "h.ply"
    save_heatmap_ply(m, m.vertices[:, 2], p)
    back = load_mesh(p)
    assert (back.n_vertices, back.n_faces) == (m.n_vertices, m.n_faces)
    with pytest.raises(LengthMismatch):
        save_heatmap_ply(m, [1.0, 2.0], p)


def test_landmark_set_has_all_classes():
    s = LandmarkSet({LandmarkClass.Cusp: [[1, 2, 3]]})
    assert all(c in s.points for c in LandmarkClass)
    assert len(s) == 1
    assert s[LandmarkClass.Mesial].shape == (0, 3)
