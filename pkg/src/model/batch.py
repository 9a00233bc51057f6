from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from numpy.typing import NDArray

from src.errors import DomainError, ShapeError


@dataclass(frozen=True)
class Batch:
    inputs: NDArray[np.float64]
    labels: NDArray[np.int64]

    def __post_init__(self) -> None:
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels)
        if x.ndim != 2:
            raise ShapeError(f"inputs must be a matrix, got shape {x.shape}")
        if x.shape[0] < 1:
            raise DomainError("a batch needs at least one example")
        if y.shape != (x.shape[0],):
            raise ShapeError(f"labels shape {y.shape} does not match {x.shape[0]} inputs")
        if np.isnan(x).any():
            raise DomainError("batch inputs contain NaN")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y.astype(np.int64, copy=False))

    def __len__(self) -> int:
        return int(self.inputs.shape[0])


@dataclass(frozen=True)
class Dataset:
    """A labeled split; the handle training and analysis code passes around."""

    inputs: NDArray[np.float64]
    labels: NDArray[np.int64]
    name: str = "data"

    def __post_init__(self) -> None:
        as_batch = Batch(self.inputs, self.labels)
        object.__setattr__(self, "inputs", as_batch.inputs)
        object.__setattr__(self, "labels", as_batch.labels)

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.inputs.shape[1])

    def as_batch(self) -> Batch:
        return Batch(self.inputs, self.labels)

    def take(self, idx: NDArray[np.int64]) -> Batch:
        return Batch(self.inputs[idx], self.labels[idx])

    def batches(self, batch_size: Optional[int] = None) -> Iterator[Batch]:
        """Ordered, non-shuffled stream covering every example once."""
        size = len(self) if batch_size is None else int(batch_size)
        for start in range(0, len(self), size):
            yield Batch(self.inputs[start:start + size], self.labels[start:start + size])


@dataclass(frozen=True)
class SplitData:
    train: Dataset
    test: Dataset
