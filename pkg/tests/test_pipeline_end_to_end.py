import numpy as np
import pandas as pd
import pytest

from fitting import NonRigidFitter
from geometry import align_to_template
from mesh_io import Mesh, read_mesh
from morphable import learn_slc
from slc_batch import EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL, EXIT_OK, main
from synth import degrade, grid_faces, make_dataset, upsample
from transfer import landmark_error, transfer_annotation

SYNTH = ["--resolution", "12", "--n-identities", "4", "--n-expressions", "3", "--n-test-identities", "2"]
LEARN = ["--k", "6", "--iters", "10"]
FIT = ["--max-iter", "10"]


def _read_table(path):
    return pd.read_csv(path, comment="#")


def _run_all(out):
    out = str(out)
    assert main(["synth", "--out", out, *SYNTH]) == EXIT_OK
    assert main(["learn", "--out", out, *LEARN]) == EXIT_OK
    assert main(["fit", "--out", out, *FIT]) == EXIT_OK
    assert main(["transfer", "--out", out]) == EXIT_OK
    assert main(["eval", "--out", out, "--eval-ks", "1", "2", "3", "--n-samples", "50"]) == EXIT_OK


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    _run_all(out)
    return out


# ---------------------------
# 端到端
# ---------------------------
def test_outputs_layout(run_dir):
    assert len(list((run_dir / "synth" / "train").glob("*.obj"))) == 12
    assert len(list((run_dir / "synth" / "targets").glob("*.obj"))) == 6
    assert (run_dir / "models" / "model.slc").exists()
    assert (run_dir / "models" / "model.slc.json").exists()
    assert (run_dir / "models" / "template.lmk").exists()
    for name in ["learn_log", "fit_summary", "transfer_summary", "landmark_errors", "landmark_summary",
                 "compactness", "generalization_pca", "generalization_slc", "specificity"]:
        assert (run_dir / "reports" / f"{name}.csv").exists(), name


def test_fit_and_transfer_summaries(run_dir):
    fits = _read_table(run_dir / "reports" / "fit_summary.csv")
    assert len(fits) == 6
    assert (fits["status"] == "ok").all()
    assert (fits["iterations"] <= 10).all()
    assert np.isfinite(fits["final_error"]).all()
    assert fits["final_error"].mean() < fits["initial_error"].mean()

    transfer = _read_table(run_dir / "reports" / "transfer_summary.csv")
    assert (transfer["status"] == "ok").all()
    assert (transfer["n_vertices"] == 144).all()

    for stem in fits["target"]:
        assert (run_dir / "fits" / f"{stem}.json").exists()
        assert (run_dir / "fits" / f"{stem}.log").read_text(encoding="utf-8").count("final error") == 1
        mesh = read_mesh(run_dir / "transfer" / f"{stem}.obj")
        assert mesh.n_vertices == 144
        assert mesh.faces is not None


def test_report_metadata(run_dir):
    lines = (run_dir / "reports" / "learn_log.csv").read_text(encoding="utf-8").splitlines()
    meta = [line for line in lines if line.startswith("#")]
    assert meta == sorted(meta)
    assert "# k=6" in meta
    log = _read_table(run_dir / "reports" / "learn_log.csv")
    assert 1 <= len(log) <= 10

    compactness = _read_table(run_dir / "reports" / "compactness.csv")
    assert compactness["k"].tolist() == [1, 2, 3]
    assert compactness["compactness"].is_monotonic_increasing


def test_fitting_the_template_is_exact(run_dir, tmp_path):
    model = run_dir / "models" / "model.slc"
    template = run_dir / "models" / "template.obj"
    assert main(["fit", "--out", str(tmp_path), "--model", str(model), str(template)]) == EXIT_OK
    fits = _read_table(tmp_path / "reports" / "fit_summary.csv")
    assert fits["target"].tolist() == ["template"]
    assert fits.loc[0, "final_error"] < 1e-6
    fitted = read_mesh(tmp_path / "fits" / "template.obj")
    np.testing.assert_allclose(fitted.vertices, read_mesh(template).vertices, atol=1e-6)


def test_rerun_is_byte_identical(run_dir, tmp_path):
    _run_all(tmp_path)
    first = {p.relative_to(run_dir): p.read_bytes() for p in run_dir.rglob("*") if p.is_file()}
    second = {p.relative_to(tmp_path): p.read_bytes() for p in tmp_path.rglob("*") if p.is_file()}
    assert sorted(first) == sorted(second)
    for path, payload in second.items():
        assert first[path] == payload, path


def test_sweep_command(tmp_path):
    out = str(tmp_path)
    assert main(["synth", "--out", out, *SYNTH]) == EXIT_OK
    argv = ["sweep", "--out", out, "--sweep-ks", "4", "--sweep-lambda1s", "0.1", "1",
            "--sweep-lambda2s", "1", "--iters", "5", "--max-iter", "5"]
    assert main(argv) == EXIT_OK
    table = _read_table(tmp_path / "reports" / "sweep.csv")
    assert len(table) == 2
    assert sorted(table["lambda1"].tolist()) == [0.1, 1.0]


def test_sweep_aligns_targets_like_fit(tmp_path, monkeypatch):
    import pipeline.commands as commands

    calls = []
    real = commands.align_to_template

    def recording(target, template, radius, crop_template):
        calls.append((target.n_vertices, template.shape, radius))
        return real(target, template, radius=radius, crop_template=crop_template)

    monkeypatch.setattr(commands, "align_to_template", recording)
    out = str(tmp_path)
    assert main(["synth", "--out", out, *SYNTH]) == EXIT_OK
    argv = ["sweep", "--out", out, "--sweep-ks", "4", "--sweep-lambda1s", "1", "--sweep-lambda2s", "1",
            "--iters", "5", "--max-iter", "5", "--crop-radius", "80"]
    assert main(argv) == EXIT_OK
    table = _read_table(tmp_path / "reports" / "sweep.csv")
    assert len(table) == 1
    # 2 个留出身份 × 3 个表情
    assert len(calls) == 6
    assert {c[2] for c in calls} == {80.0}
    assert all(shape == (144, 3) for _, shape, _ in calls)


# ---------------------------
# 退出码
# ---------------------------
def test_missing_model_is_config_error(tmp_path):
    assert main(["fit", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_training_dir_is_config_error(tmp_path):
    assert main(["learn", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_value_is_config_error(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--keep", "1.5"]) == EXIT_CONFIG


def test_bad_user_config_is_config_error(tmp_path):
    config = tmp_path / "bad.yaml"
    config.write_text("lambda3: 1\n", encoding="utf-8")
    assert main(["learn", "--out", str(tmp_path), "--config", str(config)]) == EXIT_CONFIG


def test_corrupt_model_is_data_error(tmp_path):
    model = tmp_path / "models" / "model.slc"
    model.parent.mkdir(parents=True)
    model.write_bytes(b"GARBAGE!" * 8)
    assert main(["fit", "--out", str(tmp_path)]) == EXIT_DATA


def test_corrupt_training_mesh_is_data_error(tmp_path):
    train = tmp_path / "train"
    train.mkdir()
    (train / "a.obj").write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", encoding="utf-8")
    (train / "b.obj").write_text("v 0 0 0\nv one 0 0\n", encoding="utf-8")
    assert main(["learn", "--out", str(tmp_path), "--train-dir", str(train)]) == EXIT_DATA


def test_all_targets_failing_is_internal_error(run_dir, tmp_path):
    bad = tmp_path / "broken.obj"
    bad.write_text("v 0 0\n", encoding="utf-8")
    argv = ["fit", "--out", str(tmp_path), "--model", str(run_dir / "models" / "model.slc"), str(bad)]
    assert main(argv) == EXIT_INTERNAL
    fits = _read_table(tmp_path / "reports" / "fit_summary.csv")
    assert fits["status"].tolist() == ["failed"]


# ---------------------------
# 与生成器真值对照的对应精度
# ---------------------------
def _dense_grid_positions(resolution):
    """细分后每个顶点在原网格 (列, 行) 坐标中的位置，中点落在半格上"""
    u, v = resolution
    rows, cols = np.divmod(np.arange(u * v), u)
    grid = Mesh(vertices=np.column_stack([cols, rows, np.zeros(u * v)]).astype(float), faces=grid_faces(resolution))
    return upsample(grid).vertices[:, :2]


@pytest.mark.slow
def test_correspondence_accuracy_against_generator():
    resolution = (24, 24)
    ds = make_dataset(6, 3, resolution=resolution, seed=1, n_test_identities=2)
    model = learn_slc(ds.train, k=30, lambda1=1.0, lambda2=1.0, iters=50, seed=0)
    fitter = NonRigidFitter(tau_e=0.01, max_iter=30, lam=1.0)
    grid = _dense_grid_positions(resolution)
    own = grid[: ds.train.m]

    hits, errors = [], []
    for i in range(ds.test.n):
        truth = ds.test.mesh(i)
        degraded = degrade(upsample(truth), noise_sigma=0.2, keep_fraction=0.6, seed=i, keep_landmarks=True)
        scan = degraded.mesh

        aligned = align_to_template(scan, model.mean.reshape(-1, 3))
        result = fitter.fit(model, aligned.mesh, initial_transform=aligned.transform)
        reindexed = transfer_annotation(result.shape_in_target_frame(), scan, truth.faces, truth.landmarks)

        landed = grid[degraded.provenance[reindexed.source_indices]]
        hits.append(np.abs(landed - own).max(axis=1) <= 1.0)
        errors.append(landmark_error(reindexed, scan).to_numpy())

    assert np.concatenate(hits).mean() >= 0.9
    assert np.concatenate(errors).mean() < 2.0
