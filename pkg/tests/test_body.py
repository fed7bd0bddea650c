import numpy as np
import pytest

from contactforge.mesh import (
    BodyMesh,
    MeshError,
    compute_vertex_normals,
    load_body_mesh,
    load_obj,
    load_part_labels,
    part_vertex_indices,
    save_obj,
    save_part_labels,
    validate,
)
from contactforge.parts import NUM_PARTS, PART_NAMES, PartLabel


def flat_square():
    verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    return verts, faces


def test_part_taxonomy_is_fixed():
    assert len(PART_NAMES) == 17
    assert PART_NAMES[0] == "Head"
    assert PartLabel.from_name("L_Foot").id == 14
    assert PartLabel(5).name == "L_Hand"
    assert PartLabel(0).name == "background"
    with pytest.raises(ValueError):
        PartLabel(18)


def test_flat_square_normals_all_up():
    verts, faces = flat_square()
    normals = compute_vertex_normals(verts, faces)
    assert np.allclose(normals, [0, 0, 1])


def test_cube_corner_normal_is_diagonal():
    # corner vertex 0 shared by three perpendicular unit-area right triangles;
    # area-weighted average of (0,0,1), (0,1,0), (1,0,0) -> (1,1,1)/sqrt(3)
    verts = np.array([
        [0, 0, 0],
        [1, 0, 0], [0, 1, 0],   # z-face
        [0, 0, 1],              # shared by x- and y-faces
    ], float)
    faces = np.array([
        [0, 1, 2],  # normal +z
        [0, 3, 1],  # normal +y
        [0, 2, 3],  # normal +x
    ])
    normals = compute_vertex_normals(verts, faces)
    expect = np.array([1, 1, 1], float) / np.sqrt(3)
    assert np.allclose(normals[0], expect, atol=1e-12)


def test_zero_area_face_contributes_nothing():
    verts, faces = flat_square()
    degen = np.vstack([faces, [[0, 1, 1]]])  # zero-area sliver
    with_degen = compute_vertex_normals(verts, degen)
    without = compute_vertex_normals(verts, faces)
    assert np.array_equal(with_degen, without)


def test_isolated_vertex_errors_with_index():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [9, 9, 9]], float)
    faces = np.array([[0, 1, 2]])
    with pytest.raises(MeshError, match="vertex 3"):
        compute_vertex_normals(verts, faces)


def test_normals_rotate_with_the_mesh():
    rng = np.random.default_rng(11)
    verts = rng.normal(size=(30, 3))
    faces = rng.integers(0, 30, size=(40, 3))
    faces = faces[(faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2])
                  & (faces[:, 0] != faces[:, 2])]
    used = np.unique(faces)
    remap = -np.ones(30, dtype=int)
    remap[used] = np.arange(len(used))
    verts, faces = verts[used], remap[faces]

    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    n = compute_vertex_normals(verts, faces)
    n_rot = compute_vertex_normals(verts @ q.T, faces)
    assert np.abs(n_rot - n @ q.T).max() <= 1e-6


def test_unit_normal_invariant():
    rng = np.random.default_rng(4)
    verts = np.vstack([flat_square()[0], rng.normal(size=(3, 3)) + [0, 0, 2]])
    faces = np.vstack([flat_square()[1], [[4, 5, 6]]])
    n = compute_vertex_normals(verts, faces)
    assert np.abs(np.linalg.norm(n, axis=1) - 1).max() <= 1e-6


def test_part_vertex_indices_and_partition():
    verts, faces = flat_square()
    mesh = BodyMesh(verts, faces, [1, 1, 5, 5])
    assert set(part_vertex_indices(mesh, 1)) == {0, 1}
    assert set(part_vertex_indices(mesh, "L_Hand")) == {2, 3}
    assert part_vertex_indices(mesh, 9).size == 0
    with pytest.raises(ValueError):
        part_vertex_indices(mesh, 0)
    total = sum(len(part_vertex_indices(mesh, p)) for p in range(1, NUM_PARTS + 1))
    assert total == mesh.num_vertices


def test_validate_reports_problems():
    verts, faces = flat_square()
    assert validate(BodyMesh(verts, faces, [1, 2, 3, 4])) == []

    bad_index = BodyMesh(verts, [[0, 1, 4]], [1, 2, 3, 4])
    assert any("face 0" in line and "out of range" in line for line in validate(bad_index))

    repeated = BodyMesh(verts, [[0, 0, 1]], [1, 2, 3, 4])
    assert any("repeats" in line for line in validate(repeated))

    bad_label = BodyMesh(verts, faces, [1, 2, 3, 99])
    assert any("label" in line for line in validate(bad_label))

    short = BodyMesh(verts[:2], np.empty((0, 3), int), [1, 2])
    assert any("< 3" in line for line in validate(short))


def test_meshes_are_immutable():
    verts, faces = flat_square()
    mesh = BodyMesh(verts, faces, [1, 1, 1, 1])
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 5.0


def test_obj_roundtrip(tmp_path):
    verts, faces = flat_square()
    normals = compute_vertex_normals(verts, faces)
    path = tmp_path / "mesh.obj"
    save_obj(path, verts, faces, normals)
    v2, f2, n2 = load_obj(path)
    assert np.array_equal(v2, verts)
    assert np.array_equal(f2, faces)
    assert np.array_equal(n2, normals)


def test_obj_rejects_textured_faces(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2 3/3\n")
    with pytest.raises(MeshError, match="texture"):
        load_obj(path)


def test_label_sidecar(tmp_path):
    path = tmp_path / "mesh.parts"
    save_part_labels(path, [1, 17, 5])
    assert np.array_equal(load_part_labels(path), [1, 17, 5])
    with pytest.raises(MeshError, match="3 labels for 4"):
        load_part_labels(path, expected_count=4)
    bad = tmp_path / "bad.parts"
    bad.write_text("1\n0\n")
    with pytest.raises(MeshError, match="outside"):
        load_part_labels(bad)


def test_load_body_mesh(tmp_path):
    verts, faces = flat_square()
    save_obj(tmp_path / "b.obj", verts, faces)
    save_part_labels(tmp_path / "b.parts", [14, 14, 17, 17])
    mesh = load_body_mesh(tmp_path / "b.obj", tmp_path / "b.parts")
    assert mesh.num_vertices == 4
    assert mesh.normals is None
    assert mesh.with_normals().normals is not None
