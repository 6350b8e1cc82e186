import numpy as np
import pytest
from scipy.spatial.distance import directed_hausdorff

from exceptions import DimensionMismatch, EmptyInput, InvalidHyperparam, SingularSystem
from fitting import (
    WEIGHT_FLOOR,
    FitParams,
    NonRigidFitter,
    correspond,
    get_correspondence,
    list_correspondences,
    nearest_correspond,
    nrf,
    per_vertex_error,
    regularizer,
    solve_coefficients,
    solve_deformation,
)
from fitting.registry import add_correspondence
from geometry import SimilarityTransform
from morphable import SlcModel, learn_pca, synthesize
from synth import degrade, upsample


def _brute_correspond(template, target):
    """O(n·m) 参考实现"""
    d = np.linalg.norm(template[None, :, :] - target[:, None, :], axis=-1)
    region_of = np.argmin(d, axis=1)
    d_region = d[np.arange(len(target)), region_of]
    g = np.linalg.norm(target[None, :, :] - template[:, None, :], axis=-1)
    nn = np.argmin(g, axis=1)
    d_global = g[np.arange(len(template)), nn]
    tau_g = d_global.mean() + d_global.std()

    m = len(template)
    targets = target[nn].copy()
    size = np.zeros(m, dtype=np.int64)
    tau_local = np.full(m, np.nan)
    for j in range(m):
        members = np.flatnonzero(region_of == j)
        if len(members) == 0:
            continue
        dists = d_region[members]
        tau_local[j] = dists.mean() + dists.std()
        keep = (dists <= tau_g) & (dists <= tau_local[j])
        if keep.any():
            targets[j] = target[members[keep]].mean(axis=0)
            size[j] = keep.sum()
    fallback = np.where(size == 0, nn, -1)
    return targets, size, fallback, tau_g, tau_local, region_of


# ---------------------------
# 对应
# ---------------------------
def test_correspond_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(10):
        m, n = rng.integers(20, 80), rng.integers(100, 400)
        template = rng.uniform(-30, 30, size=(m, 3))
        target = template[rng.integers(0, m, size=n)] + rng.normal(0, 2.0, size=(n, 3))
        target[:5] += 80.0

        corr = correspond(template, target)
        targets, size, fallback, tau_g, tau_local, region_of = _brute_correspond(template, target)

        np.testing.assert_array_equal(corr.region_of, region_of)
        np.testing.assert_array_equal(corr.region_size, size)
        np.testing.assert_array_equal(corr.fallback_index, fallback)
        assert corr.tau_global == pytest.approx(tau_g, rel=0, abs=1e-12)
        np.testing.assert_allclose(corr.tau_local, tau_local, rtol=0, atol=1e-12)
        np.testing.assert_allclose(corr.targets, targets, rtol=0, atol=1e-12)
        assert corr.rejected_count == n - size.sum()


def test_correspond_rejects_far_outlier():
    template = np.array([[0.0, 0, 0], [10.0, 0, 0], [0.0, 10, 0], [10.0, 10, 0]])
    target = np.vstack([template + 0.5, [[0.0, 0.0, 50.0]]])
    corr = correspond(template, target)
    assert not corr.kept[-1]
    assert corr.rejected_count == 1
    np.testing.assert_array_equal(corr.targets, template + 0.5)


def test_far_junk_cluster_only_touches_its_regions(small_model, small_dataset):
    template = small_model.mean.reshape(-1, 3)
    target = degrade(upsample(small_dataset.test.mesh(0)), noise_sigma=0.2, keep_fraction=0.6, seed=4).mesh.vertices
    clean = correspond(template, target)

    rng = np.random.default_rng(8)
    top = target[:, 2].max() + 10.0 * clean.tau_global + 20.0
    junk = rng.normal(0.0, 1.0, size=(25, 3)) + [target[:, 0].mean(), target[:, 1].mean(), top]
    noisy = correspond(template, np.vstack([target, junk]))

    n = len(target)
    assert noisy.tau_global == clean.tau_global
    assert not noisy.kept[n:].any()
    np.testing.assert_array_equal(noisy.region_of[:n], clean.region_of)
    untouched = np.setdiff1d(np.arange(len(template)), noisy.region_of[n:])
    assert len(untouched) > 0
    np.testing.assert_array_equal(noisy.targets[untouched], clean.targets[untouched])
    np.testing.assert_array_equal(noisy.region_size[untouched], clean.region_size[untouched])
    np.testing.assert_array_equal(noisy.fallback_index[untouched], clean.fallback_index[untouched])
    # 垃圾点不会成为任何模板顶点的最近邻
    assert (noisy.fallback_index < n).all()


def test_correspond_is_deterministic(rng):
    template = rng.normal(size=(30, 3))
    target = rng.normal(size=(90, 3))
    a = correspond(template, target)
    b = correspond(template, target)
    np.testing.assert_array_equal(a.targets, b.targets)
    np.testing.assert_array_equal(a.fallback_index, b.fallback_index)


def test_each_vertex_has_one_assignment(rng):
    corr = correspond(rng.normal(size=(50, 3)), rng.normal(size=(20, 3)))
    assert corr.m == 50
    assert ((corr.region_size > 0) ^ (corr.fallback_index >= 0)).all()
    assert corr.n_centroid + corr.is_fallback.sum() == 50


def test_nearest_correspond(rng):
    template = rng.normal(size=(10, 3))
    target = rng.normal(size=(40, 3))
    corr = nearest_correspond(template, target)
    d = np.linalg.norm(target[None] - template[:, None], axis=-1)
    np.testing.assert_array_equal(corr.fallback_index, d.argmin(axis=1))
    assert corr.rejected_count == 0


def test_correspond_empty_input():
    with pytest.raises(EmptyInput):
        correspond(np.zeros((3, 3)), np.empty((0, 3)))


def test_registry():
    names = [s.name for s in list_correspondences()]
    assert "mean-point" in names and "nearest" in names
    with pytest.raises(KeyError):
        get_correspondence("optimal-transport")
    with pytest.raises(KeyError):
        add_correspondence(get_correspondence("nearest"))


# ---------------------------
# 闭式形变求解
# ---------------------------
def _gradient_descent(C, x, lam, diag, n_iter=4000):
    H = C.T @ C + lam * np.diag(diag)
    b = C.T @ x
    step = 1.0 / np.linalg.eigvalsh(H)[-1]
    alpha = np.zeros(C.shape[1])
    for _ in range(n_iter):
        alpha -= step * (H @ alpha - b)
    return alpha


def test_solve_matches_iterative_minimizer():
    rng = np.random.default_rng(3)
    for _ in range(50):
        k = int(rng.integers(1, 20))
        rows = 3 * int(rng.integers(30, 100))
        C = rng.normal(size=(rows, k))
        x = rng.normal(size=rows)
        diag = 1.0 / rng.uniform(0.05, 1.0, size=k)
        alpha = solve_coefficients(C, x, 1.0, diag)
        oracle = _gradient_descent(C, x, 1.0, diag)
        np.testing.assert_allclose(alpha, oracle, rtol=1e-6, atol=1e-10)


def test_solve_zero_lambda_is_least_squares(rng):
    C = rng.normal(size=(60, 6))
    x = rng.normal(size=60)
    alpha = solve_coefficients(C, x, 0.0, np.ones(6))
    np.testing.assert_allclose(alpha, np.linalg.lstsq(C, x, rcond=None)[0], atol=1e-10)


def test_solve_zero_lambda_rank_deficient(rng):
    C = rng.normal(size=(30, 3))
    C = np.column_stack([C, C[:, 0]])
    with pytest.raises(SingularSystem):
        solve_coefficients(C, rng.normal(size=30), 0.0, np.ones(4))
    solve_coefficients(C, rng.normal(size=30), 0.1, np.ones(4))


def test_solve_negative_lambda(rng):
    with pytest.raises(InvalidHyperparam):
        solve_coefficients(np.eye(3), np.ones(3), -1.0, np.ones(3))


def test_regularizer_floors_dead_weights():
    model = SlcModel(
        mean=np.zeros(6),
        basis=np.ones((6, 3)),
        directions=np.array([[0.5, 0.0, 0.2], [0.5, 0.0, 0.2]]),
        weights=[0.5, 0.0, 0.2],
    )
    np.testing.assert_allclose(regularizer(model), [2.0, 1.0 / WEIGHT_FLOOR, 5.0])


def test_pca_regularizer_is_ridge(small_dataset):
    np.testing.assert_array_equal(regularizer(learn_pca(small_dataset.train, k=4)), np.ones(4))


def test_solve_deformation_uses_displacement(small_dataset, rng):
    pca = learn_pca(small_dataset.train, k=4)
    alpha_true = rng.normal(size=4)
    targets = synthesize(pca, alpha_true).reshape(-1, 3)
    alpha = solve_deformation(targets, pca.mean.reshape(-1, 3), pca, lam=0.0)
    np.testing.assert_allclose(alpha, alpha_true, atol=1e-9)


def test_solve_deformation_shape_mismatch(small_model):
    with pytest.raises(DimensionMismatch):
        solve_deformation(np.zeros((3, 3)), np.zeros((3, 3)), small_model)


def test_per_vertex_error_brute_force(rng):
    fitted = rng.normal(size=(40, 3))
    target = rng.normal(size=(70, 3))
    mean, d = per_vertex_error(fitted, target)
    brute = np.linalg.norm(target[None] - fitted[:, None], axis=-1).min(axis=1)
    np.testing.assert_array_equal(d, brute)
    assert mean == pytest.approx(brute.mean())


# ---------------------------
# 非刚性拟合
# ---------------------------
def test_fit_params_validation():
    with pytest.raises(InvalidHyperparam):
        FitParams(tau_e=-1.0)
    with pytest.raises(InvalidHyperparam):
        FitParams(max_iter=0)
    with pytest.raises(InvalidHyperparam):
        FitParams(lam=-0.5)


def test_fit_mean_shape_in_raw_frame(small_model):
    offset = np.array([25.0, -10.0, 40.0])
    mean = small_model.mean.reshape(-1, 3)
    result = nrf(small_model, mean, initial_transform=SimilarityTransform.translation(-offset))
    assert result.final_error < 1e-6
    np.testing.assert_allclose(result.shape_in_target_frame(), mean + offset, atol=1e-6)


def _trace_ok(result, tau_e):
    errors = [result.initial_error] + result.error_trace
    deltas = np.diff(errors) * -1
    assert result.iterations == len(result.error_trace) == len(result.alpha) == len(result.rejected_trace)
    if result.discarded_error is not None:
        # 被撤销的一步不进轨迹
        assert result.stop_reason == "error_increased" and not result.converged
        assert (deltas > tau_e).all() and result.discarded_error > result.final_error
        return
    assert (deltas[:-1] > tau_e).all()
    if result.stop_reason == "converged":
        assert result.converged and 0.0 <= deltas[-1] <= tau_e
    elif result.stop_reason == "error_increased":
        assert not result.converged and deltas[-1] < 0
    else:
        assert result.stop_reason == "max_iter"


def test_fit_held_out_face(small_model, small_dataset):
    target = small_dataset.test.mesh(0)
    result = NonRigidFitter(tau_e=0.01, max_iter=15, lam=1.0).fit(small_model, target)
    _trace_ok(result, 0.01)
    assert result.iterations <= 15
    assert result.final_error < result.initial_error
    payload = result.to_dict()
    assert payload["iterations"] == result.iterations
    assert set(payload["target_transform"]) == {"P", "T"}


def test_fit_single_iteration(small_model, small_dataset):
    result = nrf(small_model, small_dataset.test.mesh(1), max_iter=1, tau_e=0.0)
    assert result.iterations == 1
    assert result.stop_reason in ("max_iter", "converged", "error_increased")


@pytest.mark.parametrize("strategy", ["mean-point", "nearest"])
def test_fit_strategies(small_model, small_dataset, strategy):
    result = nrf(small_model, small_dataset.test.mesh(0), correspondence=strategy, max_iter=5)
    assert np.isfinite(result.final_error)
    assert result.shape.shape == (small_model.m, 3)


def test_fit_unknown_strategy(small_model):
    with pytest.raises(KeyError):
        nrf(small_model, small_model.mean.reshape(-1, 3), correspondence="optimal-transport")


def test_fit_pca_model(small_dataset):
    pca = learn_pca(small_dataset.train, k=5)
    result = nrf(pca, small_dataset.test.mesh(0), max_iter=5, lam=0.1)
    assert result.final_error < result.initial_error


def _span_alpha(model, rng, mean_disp=None, max_disp=None):
    """模型张成空间内的随机系数，按平均或最大顶点位移缩放"""
    alpha = rng.uniform(-1.0, 1.0, size=model.k)
    norms = np.linalg.norm((model.basis @ alpha).reshape(-1, 3), axis=1)
    size = norms.mean() if mean_disp is not None else norms.max()
    return alpha * (mean_disp if mean_disp is not None else max_disp) / max(size, 1e-12)


def _refine(mesh, levels):
    for _ in range(levels):
        mesh = upsample(mesh)
    return mesh


@pytest.mark.slow
def test_fit_degraded_target_in_model_span(small_model, small_dataset):
    """10 个张成空间内的目标：加密后保留 60% 顶点并加 σ = 0.2 mm 噪声"""
    template = small_dataset.train.mesh(0)
    rng = np.random.default_rng(11)
    for trial in range(10):
        alpha = _span_alpha(small_model, rng, mean_disp=2.0)
        truth = template.with_vertices(synthesize(small_model, alpha).reshape(-1, 3))
        # 5 次加密后采样间距约 0.3 mm，真值本身的最近邻误差远低于 0.5 mm
        dense = _refine(truth, 5)
        scan = degrade(dense, noise_sigma=0.2, keep_fraction=0.6, seed=trial).mesh
        result = nrf(small_model, scan, tau_e=1e-3, max_iter=100, lam=1e-3)

        _trace_ok(result, 1e-3)
        assert result.final_error < 0.5
        surface, _ = per_vertex_error(result.shape_in_target_frame(), dense.vertices)
        assert surface < 0.5


@pytest.mark.slow
def test_fit_resampled_target_recovers_surface(small_model, small_dataset):
    """无噪声、重采样到不同顶点数的张成空间内目标"""
    template = small_dataset.train.mesh(0)
    rng = np.random.default_rng(5)
    for _ in range(4):
        # 最大位移小于加密网格半间距，最近邻锁定到原顶点
        alpha = _span_alpha(small_model, rng, max_disp=0.8)
        truth = template.with_vertices(synthesize(small_model, alpha).reshape(-1, 3))
        target = upsample(truth)
        assert target.n_vertices != truth.n_vertices

        result = nrf(small_model, target, tau_e=1e-4, max_iter=200, lam=1e-3)

        _trace_ok(result, 1e-4)
        assert result.final_error < 0.1
        fitted = result.shape_in_target_frame()
        hausdorff = max(
            directed_hausdorff(fitted, truth.vertices)[0],
            directed_hausdorff(truth.vertices, fitted)[0],
        )
        assert hausdorff < 0.5


def test_fit_keeps_best_iterate(small_model, small_dataset, monkeypatch):
    import fitting.engine as engine

    errors = iter([3.0, 2.0, 2.5])
    real = engine.per_vertex_error
    monkeypatch.setattr(
        engine, "per_vertex_error",
        lambda fitted, target: (next(errors), real(fitted, target)[1]),
    )
    target = small_dataset.test.mesh(0)
    kept = nrf(small_model, target, tau_e=0.0, max_iter=10)
    assert kept.stop_reason == "error_increased" and not kept.converged
    assert kept.error_trace == [2.0] and kept.discarded_error == 2.5
    assert kept.iterations == len(kept.alpha) == 1

    errors = iter([3.0, 2.0, 2.5])
    plain = nrf(small_model, target, tau_e=0.0, max_iter=10, keep_best=False)
    assert plain.error_trace == [2.0, 2.5] and plain.discarded_error is None
    # 撤销后的形状就是只走一步的结果
    errors = iter([3.0, 2.0])
    one = nrf(small_model, target, max_iter=1)
    np.testing.assert_allclose(kept.shape, one.shape)
    np.testing.assert_allclose(kept.target_transform.P, one.target_transform.P)
