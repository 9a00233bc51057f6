from __future__ import annotations

import os
import textwrap
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest
import yaml

from src.model.batch import Batch, SplitData
from src.model.spec import MlpSpec
from src.sources.synthetic import generate_split


def pytest_collection_modifyitems(config, items):
    if os.getenv("SWALAB_ACCEPTANCE") == "1":
        return
    skip = pytest.mark.skip(reason="set SWALAB_ACCEPTANCE=1 to run acceptance runs")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_split() -> SplitData:
    train, test = generate_split("spirals", 120, 80, 0.05, seed=3)
    return SplitData(train, test)


@pytest.fixture
def bn_spec() -> MlpSpec:
    return MlpSpec((2, 8, 8, 2), activation="relu", batchnorm=True, l2_coeff=1e-4)


@pytest.fixture
def plain_spec() -> MlpSpec:
    return MlpSpec((2, 8, 2), activation="tanh", batchnorm=False, l2_coeff=1e-3)


@pytest.fixture
def make_batch(rng) -> Callable[[int, int, int], Batch]:
    def _make(n: int, d_in: int, k: int) -> Batch:
        return Batch(rng.standard_normal((n, d_in)), rng.integers(0, k, size=n))

    return _make


TINY_CONFIG = """
model:
  layer_dims: [2, 8, 2]
  activation: relu
  batchnorm: true
  l2_coeff: 0.0001
data:
  generator: spirals
  n_train: 100
  n_test: 100
  noise: 0.05
  seed: 0
trainer:
  batch_size: 20
  budget: 200
pretrain:
  schedule: {kind: piecewise, alpha1: 0.05}
swa:
  schedule: {kind: cyclic, alpha1: 0.05, alpha2: 0.001, cycle: 10}
experiment:
  seeds: [0]
"""


@pytest.fixture
def tiny_raw() -> Dict[str, Any]:
    return yaml.safe_load(TINY_CONFIG)


@pytest.fixture
def write_config(tmp_path) -> Callable[[str, str], Path]:
    def _write(text: str = TINY_CONFIG, name: str = "config.yaml") -> Path:
        p = tmp_path / name
        p.write_text(textwrap.dedent(text).lstrip("\n"), encoding="utf-8")
        return p

    return _write
