from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from src.model.batch import SplitData
from src.utils.yaml import resolve_config_path

from .csv_reader import read_csv_split
from .synthetic import generate_split

if TYPE_CHECKING:
    from src.orchestration.config import DataConfig

logger = logging.getLogger(__name__)


def make_dataset(cfg: "DataConfig") -> SplitData:
    """Train/test splits for a data section: the CSV files when `csv_path` is
    set, the named generator otherwise. Deterministic in `cfg.seed`."""
    if cfg.csv_path:
        train, test = read_csv_split(
            resolve_config_path(cfg.csv_path),
            cfg.label_column,
            test_path=resolve_config_path(cfg.csv_test_path) if cfg.csv_test_path else None,
            test_fraction=cfg.test_fraction,
            seed=cfg.seed,
        )
    else:
        train, test = generate_split(cfg.generator, cfg.n_train, cfg.n_test, cfg.noise, cfg.seed, cfg.n_classes)
    logger.debug("Dataset ready | train=%s:%d | test=%s:%d", train.name, len(train), test.name, len(test))
    return SplitData(train=train, test=test)
