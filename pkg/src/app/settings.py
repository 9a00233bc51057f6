from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from src.utils.yaml import load_yaml


def _env(key: str, default: Optional[str] = None) -> Optional[str]:
    v = os.getenv(key)
    if v is None or v == "":
        return default
    return v


def _env_bool(key: str, default: bool = False) -> bool:
    v = os.getenv(key)
    if v is None:
        return default
    return v.strip().lower() in {"1", "true", "yes", "y", "on"}


@dataclass(frozen=True)
class AppSettings:
    app_name: str
    log_level: str

    # Where commands write when --out is not given
    out_root: Path
    # Experiment config used when --config is not given
    default_config: Path

    progress: bool

    @classmethod
    def load(cls, dotenv_path: str | Path = ".env") -> "AppSettings":
        load_dotenv(dotenv_path=str(dotenv_path), override=False)

        app = load_yaml("src/config/app.yaml")
        paths = load_yaml("src/config/paths.yaml")

        name = str(app.get("app.name", "swa-lab"))
        level_default = str(app.get("app.log_level", "INFO"))
        log_level = (_env("SWALAB_LOG_LEVEL", level_default) or level_default).strip().upper()

        out_default = str(paths.get("paths.outputs.root", "runs"))
        out_root = Path((_env("SWALAB_OUT_DIR", out_default) or out_default).strip())

        cfg_default = str(paths.get("paths.configs.default", "src/config/experiment.yaml"))
        default_config = Path((_env("SWALAB_CONFIG", cfg_default) or cfg_default).strip())

        progress = _env_bool("SWALAB_PROGRESS", bool(app.get("app.progress", True)))

        return cls(
            app_name=name,
            log_level=log_level,
            out_root=out_root,
            default_config=default_config,
            progress=progress,
        )
