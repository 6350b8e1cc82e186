"""
应用级配置

负责：
1. 加载打包的默认配置 config.yaml（按 learn / fit / eval / sweep / synth 分组，外加 presets）
2. 读取用户的扁平 YAML 配置
3. 按 默认值 -> 预设 -> 用户配置 -> 命令行 的顺序合并出 PipelineConfig
"""

from pathlib import Path
from typing import Optional, Dict, Any, Mapping, Union
import yaml

from exceptions import ConfigError
from pipeline.interfaces import PipelineConfig

PRESET_SECTION = "presets"


def normalize_key(key: str) -> str:
    """命令行长参数名 -> 配置键（crop-radius -> crop_radius）"""
    return str(key).strip().lstrip("-").replace("-", "_")


def _read_yaml(path: Path) -> Any:
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"配置文件格式错误 {path}: {e}") from e


def _check_keys(values: Mapping[str, Any], source: str) -> Dict[str, Any]:
    known = set(PipelineConfig.keys())
    out = {normalize_key(k): v for k, v in values.items()}
    unknown = sorted(set(out) - known)
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}; known keys: {sorted(known)}")
    return out


class AppConfig:
    """应用配置管理"""

    _config: Optional[Dict[str, Any]] = None
    _config_path: Optional[Path] = None

    @classmethod
    def load_config(cls, config_path: Optional[Path] = None) -> Dict[str, Any]:
        """
        加载默认配置文件

        Args:
            config_path: 配置文件路径，默认为根目录的 config.yaml

        Returns:
            配置字典
        """
        if config_path is None:
            config_path = Path(__file__).parent / "config.yaml"
        config_path = Path(config_path)

        config = _read_yaml(config_path) or {}
        if not isinstance(config, dict):
            raise ConfigError(f"配置文件顶层必须是映射: {config_path}")
        cls._config = config
        cls._config_path = config_path
        return config

    @classmethod
    def get_config(cls) -> Dict[str, Any]:
        """获取（缓存的）默认配置"""
        if cls._config is None:
            cls.load_config()
        return cls._config  # type: ignore

    @classmethod
    def defaults(cls) -> Dict[str, Any]:
        """把分组配置展开成 PipelineConfig 的扁平键"""
        flat: Dict[str, Any] = {}
        for section, values in cls.get_config().items():
            if section == PRESET_SECTION:
                continue
            if not isinstance(values, dict):
                raise ConfigError(f"config section '{section}' must be a mapping")
            flat.update(_check_keys(values, f"config section '{section}'"))
        return flat

    @classmethod
    def presets(cls) -> Dict[str, Dict[str, Any]]:
        presets = cls.get_config().get(PRESET_SECTION) or {}
        return {name: _check_keys(values or {}, f"preset '{name}'") for name, values in presets.items()}

    @classmethod
    def reset(cls):
        """清空缓存（主要用于测试）"""
        cls._config = None
        cls._config_path = None


def load_user_config(path: Union[str, Path]) -> Dict[str, Any]:
    """
    读取用户配置文件（扁平 YAML，# 注释）

    Returns:
        规范化后的键值；未知键抛 ConfigError
    """
    path = Path(path)
    values = _read_yaml(path) or {}
    if not isinstance(values, dict):
        raise ConfigError(f"user config {path} must be a flat key: value mapping")
    nested = [k for k, v in values.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"user config {path} must be flat, nested keys: {nested}")
    return _check_keys(values, f"user config {path}")


def build_pipeline_config(
    user_config: Optional[Union[str, Path]] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> PipelineConfig:
    """
    合并配置：默认值 -> 预设 -> 用户配置文件 -> 命令行（后者覆盖前者）

    Args:
        user_config: 用户配置文件路径
        preset: 预设名（'main-text' / 'supplemental'）；为 None 时可由用户配置的 preset 键指定
        overrides: 命令行参数，值为 None 的键忽略

    Returns:
        PipelineConfig

    Examples:
        >>> from app import build_pipeline_config
        >>> cfg = build_pipeline_config(preset="supplemental", overrides={"out": "./run1"})
        >>> cfg.lambda1
        10.0
    """
    user = load_user_config(user_config) if user_config is not None else {}
    cli = _check_keys({k: v for k, v in (overrides or {}).items() if v is not None}, "command line")

    preset = preset or cli.pop("preset", None) or user.get("preset")
    merged = AppConfig.defaults()
    if preset is not None:
        presets = AppConfig.presets()
        if preset not in presets:
            raise ConfigError(f"unknown preset '{preset}'; available presets: {sorted(presets)}")
        merged.update(presets[preset])
    merged.update(user)
    merged.update(cli)
    merged["preset"] = preset
    return PipelineConfig(**merged)


def get_config() -> Dict[str, Any]:
    """
    获取应用配置

    Returns:
        配置字典
    """
    return AppConfig.get_config()
