from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.errors import ShapeError
from src.model.spec import ParamVector


def fold_(avg: ParamVector, w: ParamVector, count: int) -> None:
    """In place: avg <- (avg*count + w)/(count + 1), written as an increment."""
    if count == 0:
        avg[:] = w
        return
    avg += (w - avg) / (count + 1)


@dataclass(frozen=True)
class SwaState:
    """Running weight average.

    `n_models` counts captures. When `include_init` is set the starting
    vector counts as one more averaged model, so the first capture halves
    the distance to the new point.
    """

    avg: ParamVector
    n_models: int
    capture_every: int
    include_init: bool = True

    @classmethod
    def start(cls, w_init: ParamVector, capture_every: int, include_init: bool = True) -> "SwaState":
        return cls(np.array(w_init, dtype=np.float64, copy=True), 0, capture_every, include_init)

    @property
    def count(self) -> int:
        return self.n_models + (1 if self.include_init else 0)


def swa_update(s: SwaState, w: ParamVector) -> SwaState:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != s.avg.shape:
        raise ShapeError(f"cannot average vector of shape {w.shape} into average of shape {s.avg.shape}")
    avg = s.avg.copy()
    fold_(avg, w, s.count)
    return SwaState(avg, s.n_models + 1, s.capture_every, s.include_init)
