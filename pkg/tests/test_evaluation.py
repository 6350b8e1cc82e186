import numpy as np
import pandas as pd
import pytest
from scipy.spatial.transform import Rotation

from evaluation import (
    MetricEngine,
    MetricReport,
    SweepGrid,
    cell_seed,
    compactness,
    components_for_variance,
    cumulative_error_distribution,
    deformed_vertex_fraction,
    generalization,
    get_metric,
    list_metrics,
    mean_vertex_distance,
    reconstruction_errors,
    specificity,
    specificity_samples,
    sweep,
)
from evaluation.sweep import SWEEP_COLUMNS
from exceptions import EmptyInput, KTooLarge
from fitting import FitParams, NonRigidFitter
from morphable import PcaModel, TrainingSet, build_displacements, learn_pca, learn_slc, sparsity
from synth import make_dataset


# ---------------------------
# MetricReport
# ---------------------------
def test_report_csv_round_trip(tmp_path):
    report = MetricReport(
        metric="generalization",
        x=[1, 2, 5],
        y=[0.1, 1.0 / 3.0, 2.5e-7],
        metadata={"seed": 7, "model": "pca", "lambda": 0.0},
    )
    path = tmp_path / "generalization.csv"
    report.to_csv(path)

    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[:4] == ["# lambda=0.0", "# model=pca", "# seed=7", "k,generalization"]

    back = MetricReport.from_csv(path)
    assert back.metric == "generalization"
    np.testing.assert_array_equal(back.x, report.x)
    np.testing.assert_array_equal(back.y, report.y)
    assert back.metadata == report.metadata


def test_report_rejects_unsorted_x():
    with pytest.raises(ValueError):
        MetricReport(metric="compactness", x=[2, 1], y=[0.5, 0.4])


def test_report_value_at():
    report = MetricReport(metric="compactness", x=[1, 3], y=[0.5, 0.9])
    assert report.value_at(3) == 0.9
    with pytest.raises(KeyError):
        report.value_at(2)


# ---------------------------
# compactness
# ---------------------------
def test_compactness_matches_covariance_trace(small_dataset):
    ts = small_dataset.train
    pca = learn_pca(ts)
    report = compactness(pca)

    _, V = build_displacements(ts)
    cov = V @ V.T / (ts.n - 1)
    oracle = np.cumsum(pca.eigenvalues) / np.trace(cov)
    np.testing.assert_allclose(report.y, oracle, rtol=1e-9)
    assert (np.diff(report.y) >= 0).all()
    assert report.y[-1] == pytest.approx(1.0)


def test_compactness_invariant_under_rotation(small_dataset):
    ts = small_dataset.train
    R = Rotation.from_euler("xyz", [25.0, -40.0, 70.0], degrees=True).as_matrix()
    rotated = TrainingSet(shapes=(ts.shapes.reshape(ts.n, -1, 3) @ R.T).reshape(ts.n, -1), faces=ts.faces)
    np.testing.assert_allclose(compactness(learn_pca(rotated)).y, compactness(learn_pca(ts)).y, rtol=1e-9, atol=1e-12)


def test_compactness_truncated_model_keeps_total(small_dataset):
    pca = learn_pca(small_dataset.train)
    head = learn_pca(small_dataset.train, k=3)
    np.testing.assert_allclose(compactness(head).y, compactness(pca).y[:3])
    assert compactness(head).y[-1] < 1.0


def test_components_for_variance(small_dataset):
    pca = learn_pca(small_dataset.train)
    k = components_for_variance(pca, 0.9)
    y = compactness(pca).y
    assert y[k - 1] >= 0.9 - 1e-12
    assert k == 1 or y[k - 2] < 0.9
    assert components_for_variance(pca, 1.0) <= pca.k


def test_compactness_k_out_of_range(small_dataset):
    with pytest.raises(KTooLarge):
        compactness(learn_pca(small_dataset.train, k=3), ks=[4])


# ---------------------------
# generalization
# ---------------------------
def test_generalization_in_span_is_zero(small_dataset):
    ts = small_dataset.train
    pca = learn_pca(ts)
    report = generalization(pca, ts, ks=[pca.k], lam=0.0)
    assert report.y[0] < 1e-9


def test_generalization_non_increasing_for_pca(small_dataset):
    pca = learn_pca(small_dataset.train)
    report = generalization(pca, small_dataset.test, lam=0.0)
    assert (np.diff(report.y) <= 1e-9).all()
    assert report.metadata["model"] == "pca"


def test_reconstruction_matches_least_squares(small_dataset):
    pca = learn_pca(small_dataset.train, k=4)
    test = small_dataset.test
    errors = reconstruction_errors(pca, test, 4, 0.0)
    X = (test.shapes - pca.mean).T
    alpha = np.linalg.lstsq(pca.basis, X, rcond=None)[0]
    recon = (pca.mean[:, None] + pca.basis @ alpha).T
    np.testing.assert_allclose(errors, mean_vertex_distance(recon, test.shapes), atol=1e-9)


def test_generalization_slc(small_model, small_dataset):
    report = generalization(small_model, small_dataset.test, ks=[2, 8], lam=0.1)
    assert report.metadata["model"] == "slc"
    assert (report.y > 0).all()


@pytest.mark.slow
def test_slc_generalizes_better_on_small_training_set():
    ds = make_dataset(n_identities=5, n_expressions=4, resolution=(12, 12), seed=4, n_test_identities=2)
    assert ds.train.n == 20
    pca = learn_pca(ds.train)
    assert pca.k == 19
    slc = learn_slc(ds.train, k=200, lambda1=0.1, lambda2=0.1, iters=30, seed=0)
    pca_error = generalization(pca, ds.test, ks=[19], lam=0.0).y[0]
    slc_error = generalization(slc, ds.test, ks=[200], lam=0.1).y[0]
    assert slc_error <= 0.9 * pca_error


# ---------------------------
# specificity
# ---------------------------
def test_specificity_zero_variance_model():
    mean = np.arange(12, dtype=float)
    model = PcaModel(mean=mean, basis=np.eye(12)[:, :2], eigenvalues=[0.0, 0.0])
    test = TrainingSet(shapes=np.stack([mean, mean + 1.0]))
    assert specificity(model, test, k=2, n_samples=50) == 0.0


def test_specificity_samples_brute_force(small_dataset):
    pca = learn_pca(small_dataset.train)
    test = small_dataset.test
    got = specificity_samples(pca, test, k=3, n_samples=20, seed=5)

    rng = np.random.default_rng(5)
    alpha = rng.standard_normal((20, 3)) * np.sqrt(pca.eigenvalues[:3])
    samples = pca.mean + alpha @ pca.basis[:, :3].T
    expected = [min(mean_vertex_distance(s, t) for t in test.shapes) for s in samples]
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_specificity_is_seeded(small_dataset):
    pca = learn_pca(small_dataset.train)
    a = specificity(pca, small_dataset.test, k=2, n_samples=30, seed=1)
    b = specificity(pca, small_dataset.test, k=2, n_samples=30, seed=1)
    assert a == b


def test_specificity_seeds_agree_within_standard_error(small_dataset):
    pca = learn_pca(small_dataset.train)
    a = specificity_samples(pca, small_dataset.test, k=3, n_samples=500, seed=1)
    b = specificity_samples(pca, small_dataset.test, k=3, n_samples=500, seed=2)
    assert not np.array_equal(a, b)
    se = np.hypot(a.std(ddof=1) / np.sqrt(len(a)), b.std(ddof=1) / np.sqrt(len(b)))
    assert abs(a.mean() - b.mean()) < 3.0 * se


# ---------------------------
# 误差累积分布
# ---------------------------
def test_cumulative_distribution_counts():
    rng = np.random.default_rng(2)
    errors = rng.exponential(1.0, size=500)
    thresholds = [0.0, 0.5, 1.0, 2.0, 100.0]
    cdf = cumulative_error_distribution(errors, thresholds)
    expected = [np.count_nonzero(errors <= t) / 500 for t in thresholds]
    np.testing.assert_allclose(cdf.to_numpy(), expected)
    assert cdf.index.name == "error_mm"


def test_cumulative_distribution_default_bins():
    cdf = cumulative_error_distribution([0.5, 1.0, 2.0])
    assert len(cdf) == 101
    assert (np.diff(cdf.to_numpy()) >= 0).all()
    assert cdf.iloc[-1] == 1.0


def test_cumulative_distribution_empty():
    with pytest.raises(EmptyInput):
        cumulative_error_distribution([])


# ---------------------------
# MetricEngine
# ---------------------------
def test_builtin_metrics_registered():
    names = {m.name for m in list_metrics()}
    assert {"compactness", "generalization", "specificity"} <= names
    assert get_metric("specificity").default_params == {"n_samples": 1000, "seed": 0}
    with pytest.raises(KeyError):
        get_metric("hausdorff")


def test_engine_evaluate_and_write(small_dataset, tmp_path):
    pca = learn_pca(small_dataset.train)
    engine = MetricEngine()
    reports = engine.evaluate(
        pca,
        small_dataset.test,
        metrics=["compactness", "generalization", "specificity"],
        per_metric_params={"specificity": {"n_samples": 10, "seed": 3}},
        ks=[1, 2, 3],
    )
    assert set(reports) == {"compactness", "generalization", "specificity"}
    for report in reports.values():
        np.testing.assert_array_equal(report.x, [1, 2, 3])
    assert reports["specificity"].metadata["n_samples"] == 10

    paths = engine.write_reports(reports, tmp_path, suffix="_pca")
    assert paths["generalization"].name == "generalization_pca.csv"
    back = MetricReport.from_csv(paths["generalization"])
    np.testing.assert_array_equal(back.y, reports["generalization"].y)


def test_engine_evaluate_one_overrides_defaults(small_dataset):
    pca = learn_pca(small_dataset.train)
    report = MetricEngine().evaluate_one(pca, small_dataset.test, "generalization", ks=[2], lam=0.5)
    assert report.metadata["lambda"] == 0.5


# ---------------------------
# 超参数扫描
# ---------------------------
def test_grid_cells():
    grid = SweepGrid(ks=(4, 8), lambda1s=(0.1,), lambda2s=(1.0, 2.0))
    cells = grid.cells()
    assert len(cells) == 4
    assert cells[0] == ((0, 0, 0), (4, 0.1, 1.0))
    assert cells[-1] == ((1, 0, 1), (8, 0.1, 2.0))
    with pytest.raises(ValueError):
        SweepGrid(ks=())


def test_cell_seed_depends_on_coordinates():
    assert cell_seed(0, (0, 0, 0)) == cell_seed(0, (0, 0, 0))
    assert cell_seed(0, (0, 0, 0)) != cell_seed(0, (1, 0, 0))
    assert cell_seed(0, (0, 0, 0)) != cell_seed(1, (0, 0, 0))


def test_single_cell_sweep_equals_direct_run(small_dataset):
    train = small_dataset.train
    targets = [small_dataset.test.mesh(0)]
    params = FitParams(max_iter=5)
    table = sweep(SweepGrid(ks=(4,), lambda1s=(0.5,), lambda2s=(0.5,)), train, targets,
                  fit_params=params, iters=10, seed=2)
    assert list(table.columns) == SWEEP_COLUMNS
    assert len(table) == 1

    seed = cell_seed(2, (0, 0, 0))
    model = learn_slc(train, k=4, lambda1=0.5, lambda2=0.5, iters=10, seed=seed)
    fit = NonRigidFitter(params).fit(model, targets[0])
    row = table.iloc[0]
    assert row["seed"] == seed
    assert row["mean_error"] == fit.final_error
    assert row["sparsity"] == sparsity(model)
    assert row["deformed_fraction"] == deformed_vertex_fraction(model)
    assert row["final_objective"] == model.objective_trace[-1]


def test_parallel_sweep_matches_serial(small_dataset):
    grid = SweepGrid(ks=(3, 5), lambda1s=(0.5,), lambda2s=(0.5,))
    kwargs = dict(fit_params=FitParams(max_iter=3), iters=5, seed=0)
    targets = [small_dataset.test.mesh(0)]
    serial = sweep(grid, small_dataset.train, targets, max_workers=1, **kwargs)
    parallel = sweep(grid, small_dataset.train, targets, max_workers=2, **kwargs)
    pd.testing.assert_frame_equal(serial, parallel)


def test_deformed_fraction_decreases_with_lambda1(small_dataset):
    loose = learn_slc(small_dataset.train, k=6, lambda1=0.01, lambda2=0.1, iters=20)
    tight = learn_slc(small_dataset.train, k=6, lambda1=100.0, lambda2=0.1, iters=20)
    assert deformed_vertex_fraction(tight) <= deformed_vertex_fraction(loose)


@pytest.mark.slow
def test_more_components_are_sparser_and_more_local(small_dataset):
    train = small_dataset.train
    small = learn_slc(train, k=64, lambda1=1.0, lambda2=1.0, iters=5)
    large = learn_slc(train, k=512, lambda1=1.0, lambda2=1.0, iters=5)
    assert sparsity(large) > sparsity(small)
    assert deformed_vertex_fraction(large) <= deformed_vertex_fraction(small)


def test_components_stay_in_expression_region():
    ds = make_dataset(n_identities=1, n_expressions=8, resolution=(12, 12), seed=1, n_test_identities=0)
    model = learn_slc(ds.train, k=6, lambda1=0.1, lambda2=0.1, iters=20)
    inside = np.repeat(ds.expression_mask, 3)
    mass = np.abs(model.basis)
    total = mass.sum(axis=0)
    used = total > 0
    assert used.any()
    share = mass[inside].sum(axis=0)[used] / total[used]
    assert share.max() >= 0.9
