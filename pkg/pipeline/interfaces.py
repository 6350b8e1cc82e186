# pipeline/interfaces.py
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from exceptions import ConfigError

# 扁平配置键；用户配置文件和命令行长参数一一对应（crop-radius <-> crop_radius）
PATH_KEYS = ("out", "train_dir", "test_dir", "target_dir", "model")


def _as_tuple(value: Any, cast, name: str) -> Optional[Tuple]:
    if value is None:
        return None
    if isinstance(value, str):
        value = [v for v in value.replace(" ", "").split(",") if v]
    elif not isinstance(value, (list, tuple)):
        value = [value]
    try:
        return tuple(cast(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: cannot parse {value!r} ({e})") from e


@dataclass(frozen=True)
class PipelineConfig:
    """
    批处理配置

    路径：
      out: 输出根目录（models/ fits/ transfer/ reports/ synth/）
      train_dir / test_dir / target_dir: 默认为 out/synth 下对应子目录
      model: 模型文件，默认 out/models/model.slc
    学习：k, lambda1, lambda2, iters, seed
    拟合：tau_e, max_iter, lam, crop_radius, crop_template, correspondence
    评价：eval_ks（None 表示 1..k）, n_samples, eval_lam（SLC 泛化用的 λ）
    扫描：sweep_ks, sweep_lambda1s, sweep_lambda2s, workers
    合成：n_identities, n_expressions, n_test_identities, resolution, keep, noise
    """
    out: str = "./slc_output"
    train_dir: Optional[str] = None
    test_dir: Optional[str] = None
    target_dir: Optional[str] = None
    model: Optional[str] = None
    preset: Optional[str] = None

    k: int = 50
    lambda1: float = 1.0
    lambda2: float = 1.0
    iters: int = 100
    seed: int = 0

    tau_e: float = 0.01
    max_iter: int = 30
    lam: float = 1.0
    crop_radius: float = 95.0
    crop_template: bool = False
    correspondence: str = "mean-point"

    eval_ks: Optional[Tuple[int, ...]] = None
    n_samples: int = 1000
    eval_lam: float = 0.1

    sweep_ks: Tuple[int, ...] = (50,)
    sweep_lambda1s: Tuple[float, ...] = (1.0,)
    sweep_lambda2s: Tuple[float, ...] = (1.0,)
    workers: int = 1

    n_identities: int = 8
    n_expressions: int = 4
    n_test_identities: int = 2
    resolution: int = 32
    keep: float = 0.6
    noise: float = 0.2

    def __post_init__(self):
        self._coerce()
        self._validate()

    def _coerce(self) -> None:
        casts = {
            "k": int, "iters": int, "seed": int, "max_iter": int, "n_samples": int, "workers": int,
            "n_identities": int, "n_expressions": int, "n_test_identities": int, "resolution": int,
            "lambda1": float, "lambda2": float, "tau_e": float, "lam": float, "crop_radius": float,
            "eval_lam": float, "keep": float, "noise": float,
        }
        for name, cast in casts.items():
            value = getattr(self, name)
            if isinstance(value, bool):
                raise ConfigError(f"{name}: expected a number, got {value!r}")
            try:
                object.__setattr__(self, name, cast(value))
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{name}: cannot parse {value!r} ({e})") from e

        if not isinstance(self.crop_template, bool):
            raise ConfigError(f"crop_template: expected true / false, got {self.crop_template!r}")
        object.__setattr__(self, "eval_ks", _as_tuple(self.eval_ks, int, "eval_ks"))
        object.__setattr__(self, "sweep_ks", _as_tuple(self.sweep_ks, int, "sweep_ks"))
        object.__setattr__(self, "sweep_lambda1s", _as_tuple(self.sweep_lambda1s, float, "sweep_lambda1s"))
        object.__setattr__(self, "sweep_lambda2s", _as_tuple(self.sweep_lambda2s, float, "sweep_lambda2s"))
        for name in ("sweep_ks", "sweep_lambda1s", "sweep_lambda2s"):
            if not getattr(self, name):
                raise ConfigError(f"{name}: sweep grid must not be empty")
        for name in PATH_KEYS:
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, str(value))

    def _validate(self) -> None:
        checks = [
            (self.k >= 1, "k must be >= 1"),
            (self.lambda1 >= 0 and self.lambda2 >= 0, "lambda1 / lambda2 must be >= 0"),
            (self.iters >= 1, "iters must be >= 1"),
            (self.tau_e >= 0, "tau_e must be >= 0"),
            (self.max_iter >= 1, "max_iter must be >= 1"),
            (self.lam >= 0 and self.eval_lam >= 0, "lam / eval_lam must be >= 0"),
            (self.crop_radius > 0, "crop_radius must be > 0"),
            (self.n_samples >= 1, "n_samples must be >= 1"),
            (self.workers >= 1, "workers must be >= 1"),
            (self.n_identities >= 1 and self.n_expressions >= 1, "n_identities / n_expressions must be >= 1"),
            (self.n_test_identities >= 0, "n_test_identities must be >= 0"),
            (self.resolution >= 8, "resolution must be >= 8"),
            (0 < self.keep <= 1, "keep must be in (0, 1]"),
            (self.noise >= 0, "noise must be >= 0"),
            (min(self.sweep_ks) >= 1, "sweep_ks must be >= 1"),
            (min(self.sweep_lambda1s + self.sweep_lambda2s) >= 0, "sweep lambdas must be >= 0"),
            (self.eval_ks is None or (len(self.eval_ks) > 0 and min(self.eval_ks) >= 1), "eval_ks must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    # ---------------------------
    # 输出布局
    # ---------------------------
    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def models_dir(self) -> Path:
        return self.out_dir / "models"

    @property
    def fits_dir(self) -> Path:
        return self.out_dir / "fits"

    @property
    def transfer_dir(self) -> Path:
        return self.out_dir / "transfer"

    @property
    def reports_dir(self) -> Path:
        return self.out_dir / "reports"

    @property
    def synth_dir(self) -> Path:
        return self.out_dir / "synth"

    @property
    def train_path(self) -> Path:
        return Path(self.train_dir) if self.train_dir else self.synth_dir / "train"

    @property
    def test_path(self) -> Path:
        return Path(self.test_dir) if self.test_dir else self.synth_dir / "test"

    @property
    def target_path(self) -> Path:
        return Path(self.target_dir) if self.target_dir else self.synth_dir / "targets"

    @property
    def model_path(self) -> Path:
        return Path(self.model) if self.model else self.models_dir / "model.slc"

    @property
    def template_path(self) -> Path:
        return self.model_path.parent / "template.obj"

    @classmethod
    def keys(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}
