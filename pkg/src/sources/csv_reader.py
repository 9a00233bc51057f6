from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src.errors import ConfigError
from src.model.batch import Dataset

logger = logging.getLogger(__name__)


def _first_bad_row(mask: pd.Series) -> int:
    """1-based file line of the first flagged data row (line 1 is the header)."""
    return int(np.flatnonzero(mask.to_numpy())[0]) + 2


def read_labeled_csv(path: str | Path, label_column: str = "label") -> Dataset:
    """Every column other than `label_column` is a numeric feature; labels are
    non-negative integers."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"CSV not found: {p}")
    df = pd.read_csv(p, low_memory=False)

    if label_column not in df.columns:
        raise ConfigError(
            f"{p.name}: label column {label_column!r} missing; columns are {list(df.columns)}",
            key="data.label_column",
        )
    features = [c for c in df.columns if c != label_column]
    if not features:
        raise ConfigError(f"{p.name}: no feature columns", key="data.csv_path")
    if df.empty:
        raise ConfigError(f"{p.name}: no data rows", key="data.csv_path")

    x = df[features].apply(pd.to_numeric, errors="coerce")
    bad = x.isna().any(axis=1) | ~np.isfinite(x.fillna(0.0)).all(axis=1)
    if bad.any():
        line = _first_bad_row(bad)
        raise ConfigError(f"{p.name}: non-numeric or non-finite feature value", key="data.csv_path", line=line)

    y = pd.to_numeric(df[label_column], errors="coerce")
    bad_label = y.isna() | (y < 0) | (y != np.floor(y.fillna(0.0)))
    if bad_label.any():
        line = _first_bad_row(bad_label)
        raise ConfigError(f"{p.name}: label must be a non-negative integer", key="data.label_column", line=line)

    logger.info("CSV loaded | path=%s | rows=%d | features=%d", p, len(df), len(features))
    return Dataset(x.to_numpy(dtype=np.float64), y.to_numpy().astype(np.int64), name=p.stem)


def split_dataset(data: Dataset, test_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    n = len(data)
    n_test = int(round(test_fraction * n))
    if not 1 <= n_test < n:
        raise ConfigError(
            f"test_fraction {test_fraction} leaves an empty split for {n} rows", key="data.test_fraction"
        )
    perm = np.random.default_rng(seed).permutation(n)
    test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    return (
        Dataset(data.inputs[train_idx], data.labels[train_idx], name=f"{data.name}-train"),
        Dataset(data.inputs[test_idx], data.labels[test_idx], name=f"{data.name}-test"),
    )


def read_csv_split(
    path: str | Path,
    label_column: str,
    *,
    test_path: Optional[str | Path] = None,
    test_fraction: float = 0.5,
    seed: int = 0,
) -> Tuple[Dataset, Dataset]:
    data = read_labeled_csv(path, label_column)
    if test_path is None:
        return split_dataset(data, test_fraction, seed)
    test = read_labeled_csv(test_path, label_column)
    if test.input_dim != data.input_dim:
        raise ConfigError(
            f"test CSV has {test.input_dim} features, train CSV has {data.input_dim}", key="data.csv_test_path"
        )
    return data, test
