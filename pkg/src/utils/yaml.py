from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple

import yaml

from src.errors import ConfigError


def project_root() -> Path:
    """
    Resolves project root assuming this file lives at: <root>/src/utils/yaml.py
    """
    return Path(__file__).resolve().parents[2]


def resolve_config_path(path: str | Path) -> Path:
    """Absolute paths as given; relative ones against the working directory, then the project root."""
    p = Path(path)
    if p.is_absolute() or p.exists():
        return p
    return project_root() / p


def deep_get(d: Dict[str, Any], keys: str, default: Any = None) -> Any:
    cur: Any = d
    for k in keys.split("."):
        if not isinstance(cur, dict) or k not in cur:
            return default
        cur = cur[k]
    return cur


def resolve_env_placeholders(value: Any) -> Any:
    """Whole-value "${ENV_VAR}" strings become the variable's value, recursively through dicts and lists."""
    if isinstance(value, str):
        if value.startswith("${") and value.endswith("}"):
            env_name = value[2:-1].strip()
            return os.environ.get(env_name)
        return value
    if isinstance(value, dict):
        return {k: resolve_env_placeholders(v) for k, v in value.items()}
    if isinstance(value, list):
        return [resolve_env_placeholders(v) for v in value]
    return value


@dataclass(frozen=True)
class YamlConfig:
    raw: Dict[str, Any]

    def get(self, path: str, default: Any = None) -> Any:
        return deep_get(self.raw, path, default)


def read_yaml_mapping(path: str | Path) -> Tuple[Dict[str, Any], str]:
    """Parsed top-level mapping plus the source text. Syntax errors carry the line number."""
    cfg_path = resolve_config_path(path)
    if not cfg_path.exists():
        raise FileNotFoundError(f"YAML not found: {cfg_path}")

    text = cfg_path.read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{cfg_path.name}: YAML syntax error: {problem}", line=line) from exc

    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{cfg_path.name}: top level must be a mapping, got {type(raw).__name__}", line=1)
    return resolve_env_placeholders(raw), text


def load_yaml(path: str | Path) -> YamlConfig:
    raw, _ = read_yaml_mapping(path)
    return YamlConfig(raw=raw)
