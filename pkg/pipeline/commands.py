# pipeline/commands.py
"""
批处理命令：synth / learn / fit / transfer / eval / sweep

每个命令只依赖 PipelineConfig，产物全部写在 config.out 下：
  models/   model.slc, model.slc.json, template.obj (+ .lmk)
  fits/     <target>.obj (+ .lmk), <target>.json, <target>.log
  transfer/ <target>.obj, <target>.lmk
  reports/  learn_log.csv, fit_summary.csv, transfer_summary.csv, landmark_errors.csv,
            landmark_summary.csv, compactness.csv, generalization_pca.csv,
            generalization_slc.csv, specificity.csv, sweep.csv
  synth/    train/ test/ targets/, manifest.csv, regions.csv
"""
from __future__ import annotations

import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from evaluation.engine import MetricEngine
from evaluation.interfaces import MetricReport
from evaluation.sweep import SweepGrid, sweep
from exceptions import ConfigError, MeshIoError, Slc3dmmError
from fitting.engine import NonRigidFitter
from fitting.interfaces import FitParams
from fitting.registry import get_correspondence
from geometry.preprocess import align_to_template
from mesh_io.atomic import atomic_write
from mesh_io.files import read_mesh, write_mesh
from mesh_io.interfaces import Mesh
from mesh_io.model_container import read_model, write_model
from mesh_io.registry import list_formats
from morphable.interfaces import SlcModel, TrainingSet
from morphable.pca import learn_pca
from morphable.slc import SlcLearner
from synth.dataset import export_dataset, make_dataset
from synth.degrade import degrade, upsample
from transfer.annotation import landmark_error, landmark_error_summary, transfer_annotation

logger = logging.getLogger(__name__)

FIT_SUMMARY_COLUMNS = [
    "target", "status", "n_vertices", "initial_error", "final_error",
    "iterations", "converged", "stop_reason", "message",
]
TRANSFER_SUMMARY_COLUMNS = [
    "target", "status", "n_vertices", "total_distance", "mean_landmark_error", "message",
]
_LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


@dataclass
class BatchResult:
    """
    批处理命令的返回值

    outputs: 写出的主要文件
    summary: 逐目标汇总（fit / transfer），其它命令为 None
    """
    outputs: Dict[str, Path] = field(default_factory=dict)
    summary: Optional[pd.DataFrame] = None

    @property
    def n_ok(self) -> int:
        if self.summary is None:
            return 0
        return int((self.summary["status"] == "ok").sum())

    @property
    def all_failed(self) -> bool:
        return self.summary is not None and len(self.summary) > 0 and self.n_ok == 0


# ---------------------------
# 1) 通用工具
# ---------------------------
def mesh_files(directory: Path) -> List[Path]:
    """目录下所有已注册格式的网格文件，按文件名排序"""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"directory not found: {directory}")
    suffixes = {s.lower() for fmt in list_formats() for s in fmt.suffixes}
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in suffixes)


def load_training_set(directory: Path) -> TrainingSet:
    """读取目录下的已配准网格；不一致时 TopologyMismatch 指明文件名"""
    files = mesh_files(directory)
    meshes = [read_mesh(p) for p in files]
    return TrainingSet.from_meshes(meshes, names=[p.name for p in files])


def load_model(cfg) -> SlcModel:
    path = cfg.model_path
    if not path.exists():
        raise ConfigError(f"model file not found: {path}")
    return read_model(path)


def load_template(cfg, model: SlcModel) -> Mesh:
    """模型旁的 template.obj；不存在时用不带拓扑的平均脸"""
    if cfg.template_path.exists():
        template = read_mesh(cfg.template_path)
        if template.n_vertices == model.m:
            return template.with_vertices(model.mean.reshape(-1, 3))
        logger.warning("template %s has %d vertices, model has %d; ignoring it",
                       cfg.template_path, template.n_vertices, model.m)
    return Mesh(vertices=model.mean.reshape(-1, 3))


def fit_params(cfg) -> FitParams:
    try:
        get_correspondence(cfg.correspondence)
    except KeyError as e:
        raise ConfigError(str(e)) from e
    return FitParams(tau_e=cfg.tau_e, max_iter=cfg.max_iter, lam=cfg.lam, correspondence=cfg.correspondence)


def write_table(df: pd.DataFrame, path: Path, metadata: Optional[Mapping[str, Any]] = None) -> Path:
    """`# key=value` 元数据行 + CSV（%.17g），与 MetricReport 同一格式"""
    with atomic_write(path) as f:
        for key in sorted(metadata or {}):
            value = metadata[key]
            text = value if isinstance(value, str) else json.dumps(value, sort_keys=True)
            f.write(f"# {key}={text}\n")
        df.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
    return Path(path)


def write_json(payload: Mapping[str, Any], path: Path) -> Path:
    with atomic_write(path) as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return Path(path)


@contextmanager
def target_log(path: Path) -> Iterator[None]:
    """把处理单个目标期间的日志同时写到 path（覆盖）"""
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(_LOG_FORMAT))
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        yield
    finally:
        root.removeHandler(handler)
        handler.close()


# ---------------------------
# 2) synth
# ---------------------------
def cmd_synth(cfg) -> BatchResult:
    """
    合成数据集：train/ test/（已配准，带标注），
    targets/（测试形状中点细分后再下采样 + 加噪的点云，保留真值标注）
    """
    ds = make_dataset(
        cfg.n_identities,
        cfg.n_expressions,
        resolution=(cfg.resolution, cfg.resolution),
        seed=cfg.seed,
        n_test_identities=cfg.n_test_identities,
    )
    out = export_dataset(ds, cfg.synth_dir)

    rows = []
    if ds.test is None:
        logger.warning("synth: fewer than 2 test shapes, no targets written")
    else:
        for i, name in enumerate(ds.test.names):
            seed = int(np.random.SeedSequence([cfg.seed, i]).generate_state(1)[0])
            degraded = degrade(upsample(ds.test.mesh(i)), noise_sigma=cfg.noise, keep_fraction=cfg.keep,
                               seed=seed, keep_landmarks=True)
            write_mesh(degraded.mesh, cfg.target_path / f"{name}.obj")
            rows.append({"target": name, "n_vertices": degraded.mesh.n_vertices, "seed": seed})
    targets = write_table(pd.DataFrame(rows, columns=["target", "n_vertices", "seed"]),
                          cfg.synth_dir / "targets.csv",
                          {"keep": cfg.keep, "noise": cfg.noise})
    logger.info("synth: %d train, %d targets in %s", ds.train.n, len(rows), out)
    return BatchResult(outputs={
        "synth": out,
        "manifest": out / "manifest.csv",
        "regions": out / "regions.csv",
        "targets": targets,
    })


# ---------------------------
# 3) learn
# ---------------------------
def cmd_learn(cfg) -> BatchResult:
    """学习 SLC 模型，写出模型容器、模板网格和每轮目标函数日志"""
    ts = load_training_set(cfg.train_path)
    learner = SlcLearner(k=cfg.k, lambda1=cfg.lambda1, lambda2=cfg.lambda2, iters=cfg.iters, seed=cfg.seed)
    model = learner.fit(ts)

    write_model(model, cfg.model_path)
    template = Mesh(vertices=model.mean.reshape(-1, 3), faces=ts.faces, landmarks=ts.landmarks)
    write_mesh(template, cfg.template_path)
    log = write_table(learner.history_, cfg.reports_dir / "learn_log.csv", {
        "k": cfg.k, "lambda1": cfg.lambda1, "lambda2": cfg.lambda2,
        "iters": cfg.iters, "seed": cfg.seed, "n_train": ts.n,
    })
    return BatchResult(outputs={"model": cfg.model_path, "template": cfg.template_path, "learn_log": log})


# ---------------------------
# 4) fit
# ---------------------------
def _align_target(cfg, target: Mesh, mean: np.ndarray):
    """fit 与 sweep 共用的预处理：按 crop_radius 裁剪后刚性对齐到平均脸"""
    return align_to_template(target, mean.reshape(-1, 3), radius=cfg.crop_radius, crop_template=cfg.crop_template)


def _fit_one(cfg, model: SlcModel, template: Mesh, fitter: NonRigidFitter, path: Path) -> Dict[str, Any]:
    target = read_mesh(path, with_landmarks=False)
    aligned = _align_target(cfg, target, model.mean)
    result = fitter.fit(model, aligned.mesh, initial_transform=aligned.transform)

    fitted = template.with_vertices(result.shape_in_target_frame())
    write_mesh(fitted, cfg.fits_dir / f"{path.stem}.obj")
    write_json({"target": path.name, **result.to_dict()}, cfg.fits_dir / f"{path.stem}.json")
    return {
        "target": path.stem,
        "status": "ok",
        "n_vertices": target.n_vertices,
        "initial_error": result.initial_error,
        "final_error": result.final_error,
        "iterations": result.iterations,
        "converged": int(result.converged),
        "stop_reason": result.stop_reason,
        "message": "",
    }


def cmd_fit(cfg, targets: Optional[Sequence[Path]] = None) -> BatchResult:
    """
    逐目标：裁剪 + 粗对齐 -> 非刚性拟合 -> 写出拟合网格（原始目标坐标）与误差轨迹

    单个目标失败只记录日志并跳过。
    """
    model = load_model(cfg)
    template = load_template(cfg, model)
    fitter = NonRigidFitter(fit_params(cfg))
    paths = [Path(p) for p in targets] if targets is not None else mesh_files(cfg.target_path)

    rows = []
    for path in paths:
        with target_log(cfg.fits_dir / f"{path.stem}.log"):
            try:
                rows.append(_fit_one(cfg, model, template, fitter, path))
                logger.info("fit %s: final error %.4f mm", path.name, rows[-1]["final_error"])
            except (Slc3dmmError, OSError, np.linalg.LinAlgError) as e:
                logger.warning("fit %s skipped: %s", path.name, e)
                rows.append({"target": path.stem, "status": "failed", "message": str(e)})

    summary = pd.DataFrame(rows, columns=FIT_SUMMARY_COLUMNS)
    out = write_table(summary, cfg.reports_dir / "fit_summary.csv", {
        "tau_e": cfg.tau_e, "max_iter": cfg.max_iter, "lam": cfg.lam,
        "crop_radius": cfg.crop_radius, "crop_template": cfg.crop_template,
        "correspondence": cfg.correspondence,
    })
    return BatchResult(outputs={"fit_summary": out}, summary=summary)


# ---------------------------
# 5) transfer
# ---------------------------
def _default_pairs(cfg) -> List[Tuple[Path, Path]]:
    """fits/<name>.obj 与 target_dir 下同名网格配对"""
    targets = {p.stem: p for p in mesh_files(cfg.target_path)} if cfg.target_path.is_dir() else {}
    pairs = []
    for fitted in sorted(cfg.fits_dir.glob("*.obj")):
        pairs.append((fitted, targets.get(fitted.stem, cfg.target_path / fitted.name)))
    return pairs


def _transfer_one(cfg, fitted_path: Path, target_path: Path):
    if not target_path.exists():
        raise MeshIoError(f"target not found: {target_path}")
    fitted = read_mesh(fitted_path)
    target = read_mesh(target_path)
    reindexed = transfer_annotation(fitted.vertices, target, fitted.faces, fitted.landmarks)
    write_mesh(reindexed.mesh, cfg.transfer_dir / f"{target_path.stem}.obj")
    errors = landmark_error(reindexed, target) if target.landmarks and reindexed.mesh.landmarks else None
    return reindexed, errors


def cmd_transfer(cfg, pairs: Optional[Sequence[Tuple[Path, Path]]] = None) -> BatchResult:
    """
    每对 (拟合网格, 原始目标)：把模板拓扑与标注迁移到目标顶点上

    目标带真值 .lmk 时记录标注误差。
    """
    pairs = [(Path(a), Path(b)) for a, b in pairs] if pairs is not None else _default_pairs(cfg)

    rows, errors = [], {}
    for fitted_path, target_path in pairs:
        name = target_path.stem
        with target_log(cfg.transfer_dir / f"{name}.log"):
            try:
                reindexed, lmk = _transfer_one(cfg, fitted_path, target_path)
            except (Slc3dmmError, OSError) as e:
                logger.warning("transfer %s skipped: %s", name, e)
                rows.append({"target": name, "status": "failed", "message": str(e)})
                continue
            if lmk is not None:
                errors[name] = lmk
            rows.append({
                "target": name,
                "status": "ok",
                "n_vertices": reindexed.mesh.n_vertices,
                "total_distance": reindexed.total_distance,
                "mean_landmark_error": float(lmk.mean()) if lmk is not None else float("nan"),
                "message": "",
            })
            logger.info("transfer %s: %d vertices re-indexed", name, reindexed.mesh.n_vertices)

    summary = pd.DataFrame(rows, columns=TRANSFER_SUMMARY_COLUMNS)
    outputs = {"transfer_summary": write_table(summary, cfg.reports_dir / "transfer_summary.csv")}
    if errors:
        long = pd.concat(errors, names=["target"]).reset_index()
        outputs["landmark_errors"] = write_table(long, cfg.reports_dir / "landmark_errors.csv")
        table = landmark_error_summary(errors).reset_index()
        outputs["landmark_summary"] = write_table(table, cfg.reports_dir / "landmark_summary.csv")
    return BatchResult(outputs=outputs, summary=summary)


# ---------------------------
# 6) eval
# ---------------------------
def _ks_for(cfg, k_max: int) -> Optional[List[int]]:
    if cfg.eval_ks is None:
        return None
    ks = [k for k in cfg.eval_ks if k <= k_max]
    if not ks:
        raise ConfigError(f"eval_ks {list(cfg.eval_ks)} exceed the model size {k_max}")
    return ks


def cmd_eval(cfg) -> BatchResult:
    """
    PCA 基线的 compactness / generalization / specificity，
    模型文件存在时另算 SLC 的 generalization
    """
    train = load_training_set(cfg.train_path)
    test = load_training_set(cfg.test_path)
    pca = learn_pca(train)
    engine = MetricEngine()
    meta = {"train": cfg.train_path.name, "test": cfg.test_path.name, "n_train": train.n, "seed": cfg.seed}

    ks = _ks_for(cfg, pca.k)
    reports = engine.evaluate(
        pca, test,
        metrics=["compactness", "generalization", "specificity"],
        per_metric_params={
            "generalization": {"lam": 0.0},
            "specificity": {"n_samples": cfg.n_samples, "seed": cfg.seed},
        },
        ks=ks,
        **meta,
    )
    outputs = {
        "compactness": _write_report(reports["compactness"], cfg.reports_dir / "compactness.csv"),
        "generalization_pca": _write_report(reports["generalization"], cfg.reports_dir / "generalization_pca.csv"),
        "specificity": _write_report(reports["specificity"], cfg.reports_dir / "specificity.csv"),
    }

    if cfg.model_path.exists():
        model = read_model(cfg.model_path)
        slc = engine.evaluate_one(model, test, "generalization", ks=_ks_for(cfg, model.k), lam=cfg.eval_lam, **meta)
        outputs["generalization_slc"] = _write_report(slc, cfg.reports_dir / "generalization_slc.csv")
    else:
        logger.warning("eval: no model at %s, SLC generalization skipped", cfg.model_path)
    return BatchResult(outputs=outputs)


def _write_report(report: MetricReport, path: Path) -> Path:
    report.to_csv(path)
    return path


# ---------------------------
# 7) sweep
# ---------------------------
def cmd_sweep(cfg) -> BatchResult:
    """
    (k, λ1, λ2) 网格：每格学习模型并拟合全部测试形状

    测试形状先按 fit 命令的方式裁剪并对齐到训练平均脸（各格模型的平均脸相同），
    表中误差与 fit 命令可比。
    """
    train = load_training_set(cfg.train_path)
    test = load_training_set(cfg.test_path)
    mean = train.shapes.mean(axis=0)
    targets = [_align_target(cfg, test.mesh(i), mean).mesh for i in range(test.n)]
    grid = SweepGrid(ks=cfg.sweep_ks, lambda1s=cfg.sweep_lambda1s, lambda2s=cfg.sweep_lambda2s)
    table = sweep(grid, train, targets, fit_params=fit_params(cfg), iters=cfg.iters,
                  seed=cfg.seed, max_workers=cfg.workers)
    out = write_table(table, cfg.reports_dir / "sweep.csv", {
        "seed": cfg.seed, "iters": cfg.iters, "tau_e": cfg.tau_e, "max_iter": cfg.max_iter,
        "lam": cfg.lam, "crop_radius": cfg.crop_radius, "n_train": train.n, "n_targets": len(targets),
    })
    return BatchResult(outputs={"sweep": out})


COMMANDS = {
    "synth": cmd_synth,
    "learn": cmd_learn,
    "fit": cmd_fit,
    "transfer": cmd_transfer,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}
