import math

import numpy as np
import pytest

from oracles import floor_scene

from contactforge.bvh import build_index
from contactforge.contact import (
    ContactThresholds,
    ContactVertexSet,
    classify_contact,
    contact_triangles,
)
from contactforge.mesh import BodyMesh, SceneMesh


def make_floor_index():
    scene = SceneMesh(*floor_scene(up=+1))  # floor normals +z
    return scene, build_index(scene, leaf_size=4)


def single_vertex_body(position, normal, extra=((5, 5, 5), (6, 5, 5))):
    # the probe vertex plus two filler vertices far away to form a valid face
    verts = np.array([position, extra[0], extra[1]], float)
    faces = np.array([[0, 1, 2]])
    normals = np.array([normal, [0, 0, 1], [0, 0, 1]], float)
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    return BodyMesh(verts, faces, [14, 14, 14], normals)


def test_default_thresholds_match_published_values():
    th = ContactThresholds()
    assert th.delta_d == 0.07
    assert th.delta_a == 110.0


def test_threshold_validation():
    with pytest.raises(ValueError):
        ContactThresholds(delta_d=0.0)
    with pytest.raises(ValueError):
        ContactThresholds(delta_a=181.0)
    with pytest.raises(ValueError):
        ContactThresholds(delta_a=0.0)


def test_foot_sole_above_floor_is_contact():
    scene, index = make_floor_index()
    body = single_vertex_body([0, 0, 0.05], [0, 0, -1])
    cv = classify_contact(body, index, scene)
    assert 0 in cv.vertex_indices
    assert cv.distances[list(cv.vertex_indices).index(0)] == pytest.approx(0.05)


def test_distance_fail_at_8cm():
    scene, index = make_floor_index()
    body = single_vertex_body([0, 0, 0.08], [0, 0, -1])
    cv = classify_contact(body, index, scene)
    assert 0 not in cv.vertex_indices


def test_parallel_normals_fail():
    scene, index = make_floor_index()
    body = single_vertex_body([0, 0, 0.02], [0, 0, 1])  # angle 0 deg
    cv = classify_contact(body, index, scene)
    assert 0 not in cv.vertex_indices


def test_boundary_is_inclusive():
    # delta_d chosen as a power of two so the computed distance is exact;
    # the vertex normal is built so its dot with the floor normal equals
    # cos(delta_a) bit-for-bit
    scene, index = make_floor_index()
    delta_a = 110.0
    c = math.cos(math.radians(delta_a))
    s = math.sqrt(1.0 - c * c)
    body = single_vertex_body([0, 0, 0.0625], [s, 0, c])
    cv = classify_contact(body, index, scene,
                          ContactThresholds(delta_d=0.0625, delta_a=delta_a))
    assert 0 in cv.vertex_indices


def test_missing_normals_and_nonfinite_coords_error():
    scene, index = make_floor_index()
    body = BodyMesh([[0, 0, 0.05], [5, 5, 5], [6, 5, 5]], [[0, 1, 2]], [14, 14, 14])
    with pytest.raises(ValueError, match="normals"):
        classify_contact(body, index, scene)
    bad = BodyMesh([[0, 0, np.nan], [5, 5, 5], [6, 5, 5]], [[0, 1, 2]],
                   [14, 14, 14], np.tile([0.0, 0, 1], (3, 1)))
    with pytest.raises(ValueError, match="finite"):
        classify_contact(bad, index, scene)


def test_monotonic_in_thresholds():
    scene, index = make_floor_index()
    rng = np.random.default_rng(5)
    n = 60
    verts = np.column_stack([
        rng.uniform(-4, 4, n), rng.uniform(-4, 4, n), rng.uniform(0.0, 0.2, n)])
    normals = rng.normal(size=(n, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    faces = np.column_stack([np.arange(0, n - 2), np.arange(1, n - 1), np.arange(2, n)])
    body = BodyMesh(verts, faces, np.full(n, 14), normals)

    base = set(classify_contact(body, index, scene,
                                ContactThresholds(0.07, 110.0)).vertex_indices)
    wider_d = set(classify_contact(body, index, scene,
                                   ContactThresholds(0.15, 110.0)).vertex_indices)
    assert base <= wider_d
    stricter_a = set(classify_contact(body, index, scene,
                                      ContactThresholds(0.07, 150.0)).vertex_indices)
    assert stricter_a <= base


def test_rigid_invariance():
    scene_verts, scene_faces = floor_scene(up=+1)
    rng = np.random.default_rng(9)
    n = 40
    verts = np.column_stack([
        rng.uniform(-3, 3, n), rng.uniform(-3, 3, n), rng.uniform(0.0, 0.15, n)])
    normals = rng.normal(size=(n, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    faces = np.column_stack([np.arange(0, n - 2), np.arange(1, n - 1), np.arange(2, n)])

    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    t = np.array([0.3, -1.2, 0.7])

    def contacts(bverts, bnormals, sverts):
        scene = SceneMesh(sverts, scene_faces)
        body = BodyMesh(bverts, faces, np.full(n, 14), bnormals)
        index = build_index(scene, leaf_size=2)
        return set(classify_contact(body, index, scene).vertex_indices)

    before = contacts(verts, normals, scene_verts)
    after = contacts(verts @ q.T + t, normals @ q.T, scene_verts @ q.T + t)
    assert before == after


def test_contact_triangles_empty():
    body = BodyMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]], [1, 1, 1])
    assert contact_triangles(body, ContactVertexSet.empty()) == {}


def cv_for(indices):
    k = len(indices)
    return ContactVertexSet(np.asarray(indices), np.zeros(k),
                            np.zeros(k, int), np.zeros((k, 3)))


def test_contact_triangles_majority_label():
    # labels (L_Foot=14, L_Foot=14, L_Calf=13); one contact vertex -> L_Foot
    body = BodyMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]], [14, 14, 13])
    out = contact_triangles(body, cv_for([0]))
    assert set(out) == {14}
    assert out[14].tolist() == [0]


def test_contact_triangles_three_way_tie_takes_lowest_id():
    # labels L_Hand=5, R_Hand=8, Head=1 -> lowest id 1 (Head)
    body = BodyMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]], [5, 8, 1])
    out = contact_triangles(body, cv_for([1]))
    assert set(out) == {1}


def test_contact_triangles_face_appears_once():
    body = BodyMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]],
                    [[0, 1, 2], [1, 3, 2]], [5, 5, 8, 8])
    out = contact_triangles(body, cv_for([1, 2]))
    all_faces = np.concatenate(list(out.values()))
    assert len(all_faces) == len(np.unique(all_faces)) == 2


def test_contact_vertex_set_save_load(tmp_path):
    cv = ContactVertexSet([1, 5, 9], [0.01, 0.025, 0.0699],
                          [3, 0, 7], np.zeros((3, 3)))
    path = tmp_path / "cv.txt"
    cv.save(path)
    back = ContactVertexSet.load(path)
    assert np.array_equal(back.vertex_indices, cv.vertex_indices)
    assert np.array_equal(back.distances, cv.distances)
    assert np.array_equal(back.closest_faces, cv.closest_faces)


def test_contact_vertex_set_requires_sorted_unique():
    with pytest.raises(ValueError):
        ContactVertexSet([2, 1], [0, 0], [0, 0], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ContactVertexSet([1, 1], [0, 0], [0, 0], np.zeros((2, 3)))
