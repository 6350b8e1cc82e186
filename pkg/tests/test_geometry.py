import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from exceptions import DegenerateConfiguration, EmptyInput, EmptyResult
from geometry import (
    SimilarityTransform,
    SpatialIndex,
    align_to_template,
    crop,
    estimate_similarity,
    icp,
    nose_tip,
    procrustes,
    submesh,
)
from mesh_io import Mesh
from synth import FaceSpec, generate


def _brute_knn(points, queries, k):
    d = np.linalg.norm(points[None, :, :] - queries[:, None, :], axis=-1)
    idx = np.broadcast_to(np.arange(len(points)), d.shape)
    order = np.lexsort((idx, d), axis=-1)[:, :k]
    return np.take_along_axis(d, order, axis=1), order


def _random_similarity(rng, max_deg=30.0, scale=(0.8, 1.2), max_shift=20.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(-max_deg, max_deg))
    R = Rotation.from_rotvec(axis * angle).as_matrix()
    s = rng.uniform(*scale)
    shift = rng.uniform(-1.0, 1.0, size=3)
    shift *= rng.uniform(0.0, max_shift) / np.linalg.norm(shift)
    return SimilarityTransform(s * R, shift)


# ---------------------------
# SimilarityTransform
# ---------------------------
def test_then_and_inverse(rng):
    a = _random_similarity(rng)
    b = _random_similarity(rng)
    pts = rng.normal(size=(10, 3))
    np.testing.assert_allclose(a.then(b).apply(pts), b.apply(a.apply(pts)), atol=1e-12)
    np.testing.assert_allclose(a.then(a.inverse()).apply(pts), pts, atol=1e-10)


# ---------------------------
# SpatialIndex
# ---------------------------
def test_nearest_matches_brute_force(rng):
    points = rng.uniform(-50, 50, size=(300, 3))
    queries = rng.uniform(-60, 60, size=(200, 3))
    d, idx = SpatialIndex(points).query(queries)
    bd, bi = _brute_knn(points, queries, 1)
    np.testing.assert_array_equal(idx, bi[:, 0])
    np.testing.assert_array_equal(d, bd[:, 0])


def test_ties_break_by_lowest_index():
    # 整数格点，查询点到多个格点等距
    g = np.arange(4, dtype=float)
    points = np.array(np.meshgrid(g, g, g, indexing="ij")).reshape(3, -1).T
    queries = points[:20] + 0.5
    index = SpatialIndex(points)
    for k in (1, 3, 8):
        d, idx = index.query_k(queries, k)
        bd, bi = _brute_knn(points, queries, k)
        np.testing.assert_array_equal(idx, bi)
        np.testing.assert_array_equal(d, bd)


def test_query_k_capped_at_size(rng):
    points = rng.normal(size=(4, 3))
    d, idx = SpatialIndex(points).query_k(rng.normal(size=(2, 3)), 10)
    assert idx.shape == (2, 4)
    assert all(sorted(row) == [0, 1, 2, 3] for row in idx.tolist())


def test_empty_index():
    with pytest.raises(EmptyInput):
        SpatialIndex(np.empty((0, 3)))


# ---------------------------
# 相似变换估计
# ---------------------------
def test_similarity_recovery(rng):
    for _ in range(20):
        target = rng.uniform(-60, 60, size=(150, 3))
        truth = _random_similarity(rng)
        template = truth.apply(target)
        est = estimate_similarity(template, target)
        residual = np.linalg.norm(est.apply(target) - template, axis=1).max()
        assert residual < 1e-6
        np.testing.assert_allclose(est.P, truth.P, atol=1e-9)
        np.testing.assert_allclose(est.T, truth.T, atol=1e-7)


def test_similarity_identity(rng):
    pts = rng.normal(size=(20, 3))
    est = estimate_similarity(pts, pts)
    np.testing.assert_allclose(est.P, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(est.T, np.zeros(3), atol=1e-12)


def test_similarity_planar_target_is_degenerate(rng):
    target = rng.normal(size=(30, 3))
    target[:, 2] = 0.0
    with pytest.raises(DegenerateConfiguration):
        estimate_similarity(rng.normal(size=(30, 3)), target)


# ---------------------------
# 刚性对齐
# ---------------------------
def test_procrustes_is_rigid(rng):
    src = rng.normal(size=(40, 3))
    R = Rotation.from_euler("xyz", [10, -20, 35], degrees=True).as_matrix()
    dst = src @ R.T + np.array([1.0, 2.0, 3.0])
    tf = procrustes(src, dst)
    np.testing.assert_allclose(tf.apply(src), dst, atol=1e-10)
    assert np.linalg.det(tf.P) == pytest.approx(1.0)


def test_icp_recovers_small_motion(rng):
    g = np.arange(4) * 30.0
    lattice = np.array(np.meshgrid(g, g, [0.0, 30.0], indexing="ij")).reshape(3, -1).T
    target = lattice - lattice.mean(axis=0) + rng.uniform(-2, 2, size=lattice.shape)
    R = Rotation.from_euler("y", 5, degrees=True).as_matrix()
    source = target @ R.T + np.array([2.0, 1.0, 0.0])

    result = icp(source, target, max_iter=100, tol=1e-12)
    np.testing.assert_allclose(result.transform.apply(source), target, atol=1e-6)
    assert result.errors[-1] < 1e-6
    assert all(b <= a + 1e-12 for a, b in zip(result.errors, result.errors[1:]))


def test_icp_errors_non_increasing(rng):
    target = rng.uniform(-40, 40, size=(200, 3))
    R = Rotation.from_euler("xz", [8, -6], degrees=True).as_matrix()
    source = target[:120] @ R.T + np.array([3.0, -2.0, 1.0])
    result = icp(source, target, max_iter=60, tol=1e-9)
    assert all(b <= a + 1e-9 for a, b in zip(result.errors, result.errors[1:]))


def test_icp_degenerate_inputs():
    with pytest.raises(DegenerateConfiguration):
        icp(np.array([[0.0, 0, 0], [1.0, 0, 0]]), np.eye(3))
    line = np.column_stack([np.arange(5.0), np.zeros(5), np.zeros(5)])
    with pytest.raises(DegenerateConfiguration):
        icp(line, np.eye(3))


# ---------------------------
# 预处理
# ---------------------------
@pytest.fixture
def face():
    return generate(FaceSpec(resolution=(12, 12)))


def test_nose_tip_matches_landmark(face):
    assert nose_tip(face.vertices) == face.landmarks["nose_tip"]


def test_crop_keeps_ball_and_centres(face):
    result = crop(face, radius=40.0)
    tip = face.vertices[result.nose_tip]
    d = np.linalg.norm(face.vertices - tip, axis=1)
    np.testing.assert_array_equal(result.kept, np.flatnonzero(d <= 40.0))
    assert 0 < len(result.kept) < face.n_vertices
    np.testing.assert_allclose(result.mesh.vertices.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(result.transform.apply(face.vertices[result.kept]), result.mesh.vertices)


def test_crop_tiny_radius_keeps_tip(face):
    result = crop(face, radius=1e-9)
    np.testing.assert_array_equal(result.kept, [face.landmarks["nose_tip"]])


def test_crop_negative_radius_is_empty(face):
    with pytest.raises(EmptyResult):
        crop(face, radius=-1.0)


def test_submesh_drops_faces_and_landmarks(face):
    kept = np.arange(face.n_vertices // 2)
    sub = submesh(face, kept)
    assert sub.n_vertices == len(kept)
    assert sub.faces.max() < len(kept)
    for name, i in sub.landmarks.items():
        np.testing.assert_array_equal(sub.vertices[i], face.vertices[face.landmarks[name]])


def test_align_translation_is_exact(face):
    moved = face.with_vertices(face.vertices + np.array([12.0, -7.0, 30.0]))
    aligned = align_to_template(moved, face.vertices, radius=500.0)
    np.testing.assert_allclose(aligned.mesh.vertices, face.vertices, atol=1e-9)


def test_align_small_rotation(face):
    R = Rotation.from_euler("y", 2, degrees=True).as_matrix()
    moved = face.with_vertices(face.vertices @ R.T + np.array([10.0, -5.0, 3.0]))
    aligned = align_to_template(moved, face.vertices, radius=500.0)
    err = np.linalg.norm(aligned.mesh.vertices - face.vertices, axis=1).mean()
    assert err < 0.5
    np.testing.assert_allclose(
        aligned.transform.apply(moved.vertices[aligned.kept]), aligned.mesh.vertices, atol=1e-9
    )


def test_align_crops_target(face):
    aligned = align_to_template(face, face.vertices, radius=30.0)
    assert len(aligned.kept) < face.n_vertices
    assert aligned.mesh.n_vertices == len(aligned.kept)


def test_align_point_cloud():
    cloud = Mesh(vertices=generate(FaceSpec(resolution=(10, 10))).vertices)
    aligned = align_to_template(cloud, cloud.vertices, radius=None)
    np.testing.assert_allclose(aligned.mesh.vertices, cloud.vertices, atol=1e-9)
