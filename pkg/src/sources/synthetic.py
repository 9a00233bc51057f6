from __future__ import annotations

import logging
from typing import Callable, Dict, Tuple

import numpy as np
from numpy.typing import NDArray

from src.errors import DomainError
from src.model.batch import Dataset

logger = logging.getLogger(__name__)

BLOB_RADIUS = 3.0
SPIRAL_TURNS = 1.5


def _shuffled(x: NDArray[np.float64], y: NDArray[np.int64], rng: np.random.Generator):
    perm = rng.permutation(y.size)
    return x[perm], y[perm]


def blobs(n: int, noise: float, rng: np.random.Generator, n_classes: int = 3):
    """Gaussian blobs centered on a circle of radius 3, classes as balanced as n allows."""
    if n_classes < 2:
        raise DomainError(f"blobs need at least two classes, got {n_classes}")
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    centers = BLOB_RADIUS * np.column_stack([np.cos(angles), np.sin(angles)])
    y = np.arange(n, dtype=np.int64) % n_classes
    x = centers[y] + noise * rng.standard_normal((n, 2))
    return _shuffled(x, y, rng)


def spirals(n: int, noise: float, rng: np.random.Generator):
    """Two interleaved arms inside the unit disk; arm k is the other rotated by pi."""
    y = np.arange(n, dtype=np.int64) % 2
    t = np.sqrt(rng.uniform(0.0, 1.0, size=n))
    theta = 2.0 * np.pi * SPIRAL_TURNS * t + np.pi * y
    x = t[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    x = x + noise * rng.standard_normal((n, 2))
    return _shuffled(x, y, rng)


def xor(n: int, noise: float, rng: np.random.Generator):
    """Four clusters at (+-1, +-1); label is (x > 0) xor (y > 0) of the cluster center."""
    corners = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    cluster = np.arange(n) % 4
    centers = corners[cluster]
    y = ((centers[:, 0] > 0) ^ (centers[:, 1] > 0)).astype(np.int64)
    x = centers + noise * rng.standard_normal((n, 2))
    return _shuffled(x, y, rng)


GENERATORS: Dict[str, Callable[..., Tuple[NDArray[np.float64], NDArray[np.int64]]]] = {
    "blobs": blobs,
    "spirals": spirals,
    "xor": xor,
}


def n_classes_of(name: str, n_classes: int = 3) -> int:
    return n_classes if name == "blobs" else 2


def generate_split(
    name: str,
    n_train: int,
    n_test: int,
    noise: float,
    seed: int,
    n_classes: int = 3,
) -> Tuple[Dataset, Dataset]:
    """Train and test sets from independent child streams of `seed`."""
    if name not in GENERATORS:
        raise DomainError(f"unknown generator {name!r}; expected one of {sorted(GENERATORS)}")
    if n_train < 1 or n_test < 1:
        raise DomainError(f"n_train and n_test must be >= 1, got {n_train}, {n_test}")
    if noise < 0:
        raise DomainError(f"noise must be >= 0, got {noise}")

    fn = GENERATORS[name]
    kwargs = {"n_classes": n_classes} if name == "blobs" else {}
    train_seq, test_seq = np.random.SeedSequence(seed).spawn(2)
    x_tr, y_tr = fn(n_train, noise, np.random.default_rng(train_seq), **kwargs)
    x_te, y_te = fn(n_test, noise, np.random.default_rng(test_seq), **kwargs)
    logger.info(
        "Synthetic data generated | generator=%s | n_train=%d | n_test=%d | noise=%g | seed=%d",
        name, n_train, n_test, noise, seed,
    )
    return Dataset(x_tr, y_tr, name=f"{name}-train"), Dataset(x_te, y_te, name=f"{name}-test")
