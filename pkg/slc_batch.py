"""
SLC 形变模型批处理脚本

子命令：
1. synth     生成合成训练/测试集与目标点云
2. learn     学习 SLC 模型
3. fit       把模型拟合到目标扫描
4. transfer  把模板拓扑与标注迁移到目标
5. eval      compactness / generalization / specificity 报告
6. sweep     (k, λ1, λ2) 网格扫描

退出码：0 成功；2 配置错误或缺少模型文件；3 数据错误；1 其它错误（含全部目标失败）
"""

import sys
import logging
import argparse
import traceback
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from exceptions import ConfigError, DATA_ERRORS, MeshIoError
from app import build_pipeline_config
from pipeline.interfaces import PipelineConfig
from pipeline.commands import COMMANDS, BatchResult

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3

# 子命令 -> 该命令使用的配置键（其它键仍可写在配置文件里）
COMMAND_KEYS = {
    "synth": ["out", "seed", "n_identities", "n_expressions", "n_test_identities", "resolution", "keep", "noise",
              "target_dir"],
    "learn": ["out", "train_dir", "model", "k", "lambda1", "lambda2", "iters", "seed"],
    "fit": ["out", "target_dir", "model", "tau_e", "max_iter", "lam", "crop_radius", "crop_template",
            "correspondence"],
    "transfer": ["out", "target_dir"],
    "eval": ["out", "train_dir", "test_dir", "model", "eval_ks", "n_samples", "eval_lam", "seed"],
    "sweep": ["out", "train_dir", "test_dir", "sweep_ks", "sweep_lambda1s", "sweep_lambda2s", "workers",
              "iters", "seed", "tau_e", "max_iter", "lam", "crop_radius", "crop_template", "correspondence"],
}

# 配置键 -> (argparse 参数, 帮助)
FLAG_SPECS: Dict[str, Dict[str, Any]] = {
    "out": dict(type=str, help="输出根目录 (默认: ./slc_output)"),
    "train_dir": dict(type=str, help="训练网格目录 (默认: <out>/synth/train)"),
    "test_dir": dict(type=str, help="测试网格目录 (默认: <out>/synth/test)"),
    "target_dir": dict(type=str, help="目标扫描目录 (默认: <out>/synth/targets)"),
    "model": dict(type=str, help="模型文件 (默认: <out>/models/model.slc)"),
    "k": dict(type=int, help="分量数 (默认: 50)"),
    "lambda1": dict(type=float, help="ℓ1 权重 λ1 (默认: 1.0)"),
    "lambda2": dict(type=float, help="ℓ2 权重 λ2 (默认: 1.0)"),
    "iters": dict(type=int, help="最多交替轮数 (默认: 100)"),
    "seed": dict(type=int, help="随机种子 (默认: 0)"),
    "tau_e": dict(type=float, help="拟合误差改进阈值 mm (默认: 0.01)"),
    "max_iter": dict(type=int, help="拟合最大迭代数 (默认: 30)"),
    "lam": dict(type=float, help="形变正则 λ (默认: 1.0)"),
    "crop_radius": dict(type=float, help="鼻尖裁剪半径 mm (默认: 95)"),
    "crop_template": dict(action="store_true", help="ICP 时也裁剪模板点 (默认: 不裁剪)"),
    "correspondence": dict(type=str, help="对应策略 mean-point / nearest (默认: mean-point)"),
    "eval_ks": dict(type=int, nargs="+", help="评价的分量数列表 (默认: 1..k)"),
    "n_samples": dict(type=int, help="specificity 样本数 (默认: 1000)"),
    "eval_lam": dict(type=float, help="SLC 泛化误差的 λ (默认: 0.1)"),
    "sweep_ks": dict(type=int, nargs="+", help="扫描的 k 列表"),
    "sweep_lambda1s": dict(type=float, nargs="+", help="扫描的 λ1 列表"),
    "sweep_lambda2s": dict(type=float, nargs="+", help="扫描的 λ2 列表"),
    "workers": dict(type=int, help="扫描并行线程数 (默认: 1)"),
    "n_identities": dict(type=int, help="训练身份数 (默认: 8)"),
    "n_expressions": dict(type=int, help="每个身份的表情数 (默认: 4)"),
    "n_test_identities": dict(type=int, help="留出身份数 (默认: 2)"),
    "resolution": dict(type=int, help="网格分辨率 (默认: 32)"),
    "keep": dict(type=float, help="目标点云保留比例 (默认: 0.6)"),
    "noise": dict(type=float, help="目标点云噪声 mm (默认: 0.2)"),
}


def build_parser() -> argparse.ArgumentParser:
    """构造命令行解析器"""
    parser = argparse.ArgumentParser(
        prog="slc-batch",
        description="SLC 形变模型批处理脚本",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  # 合成数据 -> 学习 -> 拟合 -> 标注迁移 -> 评价
  slc-batch synth --out ./run
  slc-batch learn --out ./run --preset supplemental
  slc-batch fit --out ./run
  slc-batch transfer --out ./run
  slc-batch eval --out ./run --eval-ks 1 5 10

  # 配置文件（扁平 YAML，键与长参数一致），命令行参数覆盖配置文件
  slc-batch learn --config my.yaml --k 64

  # 超参数扫描
  slc-batch sweep --out ./run --sweep-ks 64 512 --sweep-lambda1s 1 10
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    for name, keys in COMMAND_KEYS.items():
        cmd = sub.add_parser(name, help=COMMANDS[name].__doc__.strip().splitlines()[0])
        cmd.add_argument("--config", type=str, default=None, help="用户配置文件（扁平 YAML）")
        cmd.add_argument("--preset", type=str, default=None, help="预设 main-text / supplemental")
        cmd.add_argument("--verbose", "-v", action="store_true", help="输出调试日志与异常堆栈")
        for key in keys:
            spec = dict(FLAG_SPECS[key])
            cmd.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None, **spec)
        if name == "fit":
            cmd.add_argument("targets", nargs="*", help="目标网格文件（默认: target-dir 下全部）")
        if name == "transfer":
            cmd.add_argument("--pair", nargs=2, action="append", metavar=("FITTED", "TARGET"),
                             default=None, help="拟合网格与原始目标，可重复")
    return parser


def setup_logging(verbose: bool) -> None:
    """根 logger 放行 INFO（逐目标日志文件需要），控制台只显示 WARNING 以上"""
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.DEBUG if verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, handlers=[console], force=True)


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = set(PipelineConfig.keys())
    return {k: v for k, v in vars(args).items() if k in keys and v is not None}


def _run(args: argparse.Namespace, cfg: PipelineConfig) -> BatchResult:
    command = COMMANDS[args.command]
    if args.command == "fit" and args.targets:
        return command(cfg, targets=[Path(p) for p in args.targets])
    if args.command == "transfer" and args.pair:
        return command(cfg, pairs=[(Path(a), Path(b)) for a, b in args.pair])
    return command(cfg)


def _print_result(result: BatchResult) -> None:
    for name, path in result.outputs.items():
        print(f"  ✓ {name}: {path}")
    if result.summary is not None:
        failed = result.summary[result.summary["status"] != "ok"]
        print(f"  - 成功: {result.n_ok} / {len(result.summary)}")
        for _, row in failed.iterrows():
            print(f"  ✗ {row['target']}: {row['message']}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主函数，返回退出码"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    print("=" * 80)
    print(f"slc-batch {args.command}")
    print("=" * 80)

    try:
        cfg = build_pipeline_config(args.config, args.preset, _overrides(args))
        print(f"  - 输出目录: {cfg.out_dir}")
        if cfg.preset:
            print(f"  - 预设: {cfg.preset}")
        result = _run(args, cfg)
    except ConfigError as e:
        print(f"✗ 配置错误: {e}", file=sys.stderr)
        if args.verbose:
            traceback.print_exc()
        return EXIT_CONFIG
    except DATA_ERRORS + (MeshIoError,) as e:
        print(f"✗ 数据错误: {e}", file=sys.stderr)
        if args.verbose:
            traceback.print_exc()
        return EXIT_DATA
    except Exception as e:
        print(f"✗ 内部错误: {type(e).__name__}: {e}", file=sys.stderr)
        if args.verbose:
            traceback.print_exc()
        return EXIT_INTERNAL

    _print_result(result)
    if result.all_failed:
        print("✗ 所有目标均失败", file=sys.stderr)
        return EXIT_INTERNAL

    print("=" * 80)
    print("执行完成")
    print("=" * 80)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
