from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Union

from src.errors import ConfigError, DomainError


def _require(cond: bool, message: str, key: str) -> None:
    if not cond:
        raise ConfigError(message, key=key)


@dataclass(frozen=True)
class Constant:
    alpha1: float

    def __post_init__(self) -> None:
        _require(self.alpha1 > 0, f"alpha1 must be > 0, got {self.alpha1}", "schedule.alpha1")

    def at(self, i: int, iters_per_epoch: int) -> float:
        return self.alpha1


@dataclass(frozen=True)
class CyclicLinear:
    """Within each cycle of `c` iterations the rate falls linearly from just
    under alpha1 to alpha2, then jumps back up."""

    alpha1: float
    alpha2: float
    c: int

    def __post_init__(self) -> None:
        _require(self.alpha2 > 0, f"alpha2 must be > 0, got {self.alpha2}", "schedule.alpha2")
        _require(
            self.alpha1 >= self.alpha2,
            f"cyclic schedule needs α1 ≥ α2, got alpha1={self.alpha1}, alpha2={self.alpha2}",
            "schedule.alpha2",
        )
        _require(int(self.c) == self.c and self.c >= 1, f"cycle must be an integer >= 1, got {self.c}", "schedule.cycle")

    def t(self, i: int) -> float:
        return ((i - 1) % self.c + 1) / self.c

    def at(self, i: int, iters_per_epoch: int) -> float:
        t = self.t(i)
        return (1.0 - t) * self.alpha1 + t * self.alpha2


@dataclass(frozen=True)
class CosineSegment:
    """Repeats one segment of a cosine annealing curve:
    base * (1 + cos(pi * (seg_start + epoch mod seg_len) / period))."""

    base: float = 0.1
    seg_start: int = 1600
    seg_len: int = 100
    period: int = 1800

    def __post_init__(self) -> None:
        _require(self.base > 0, f"base must be > 0, got {self.base}", "schedule.base")
        _require(self.seg_len >= 1, f"seg_len must be >= 1, got {self.seg_len}", "schedule.seg_len")
        _require(self.period >= 1, f"period must be >= 1, got {self.period}", "schedule.period")
        _require(
            0 <= self.seg_start and self.seg_start + self.seg_len <= self.period,
            "cosine segment must lie inside one period",
            "schedule.seg_start",
        )

    @property
    def alpha1(self) -> float:
        return 2.0 * self.base

    def at(self, i: int, iters_per_epoch: int) -> float:
        epoch = (i - 1) // iters_per_epoch
        return self.base * (1.0 + math.cos(math.pi * (self.seg_start + epoch % self.seg_len) / self.period))


@dataclass(frozen=True)
class PiecewiseDecay:
    """alpha1 for the first half of the budget, linear decay to 0.01*alpha1
    until 90%, then flat."""

    alpha1: float
    budget_iters: int

    def __post_init__(self) -> None:
        _require(self.alpha1 > 0, f"alpha1 must be > 0, got {self.alpha1}", "schedule.alpha1")
        _require(self.budget_iters >= 1, f"budget must be >= 1, got {self.budget_iters}", "schedule.budget")

    def at(self, i: int, iters_per_epoch: int) -> float:
        progress = (i - 1) / self.budget_iters
        if progress < 0.5:
            return self.alpha1
        if progress < 0.9:
            return self.alpha1 * (1.0 - 0.99 * (progress - 0.5) / 0.4)
        return 0.01 * self.alpha1


LrSchedule = Union[Constant, CyclicLinear, CosineSegment, PiecewiseDecay]


def lr_at(schedule: LrSchedule, i: int, iters_per_epoch: int = 1) -> float:
    """Learning rate at 1-based iteration `i`."""
    if i < 1:
        raise DomainError(f"iteration counter is 1-based, got {i}")
    if iters_per_epoch < 1:
        raise DomainError(f"iters_per_epoch must be >= 1, got {iters_per_epoch}")
    return schedule.at(i, iters_per_epoch)


def is_capture_point(schedule: LrSchedule, i: int, capture_every: int) -> bool:
    if capture_every < 1:
        raise DomainError(f"capture_every must be >= 1, got {capture_every}")
    return i % capture_every == 0


def default_capture_every(schedule: LrSchedule, iters_per_epoch: int) -> int:
    """Cycle end for the cyclic schedule, once per epoch otherwise."""
    if isinstance(schedule, CyclicLinear):
        return schedule.c
    return iters_per_epoch


def iters_per_epoch(n_examples: int, batch_size: int) -> int:
    return max(1, n_examples // batch_size)


def schedule_from_dict(raw: Mapping[str, Any], default_budget: int = 1) -> LrSchedule:
    kind = str(raw.get("kind", "constant")).strip().lower()
    if kind == "constant":
        return Constant(alpha1=float(raw["alpha1"]))
    if kind == "cyclic":
        return CyclicLinear(alpha1=float(raw["alpha1"]), alpha2=float(raw["alpha2"]), c=int(raw["cycle"]))
    if kind == "cosine":
        return CosineSegment(
            base=float(raw.get("base", 0.1)),
            seg_start=int(raw.get("seg_start", 1600)),
            seg_len=int(raw.get("seg_len", 100)),
            period=int(raw.get("period", 1800)),
        )
    if kind == "piecewise":
        budget = raw.get("budget")
        return PiecewiseDecay(alpha1=float(raw["alpha1"]), budget_iters=int(budget or default_budget))
    raise ConfigError(f"unknown schedule kind {kind!r}", key="schedule.kind")


def schedule_to_dict(schedule: LrSchedule) -> Dict[str, Any]:
    if isinstance(schedule, Constant):
        return {"kind": "constant", "alpha1": schedule.alpha1}
    if isinstance(schedule, CyclicLinear):
        return {"kind": "cyclic", "alpha1": schedule.alpha1, "alpha2": schedule.alpha2, "cycle": schedule.c}
    if isinstance(schedule, CosineSegment):
        return {
            "kind": "cosine",
            "base": schedule.base,
            "seg_start": schedule.seg_start,
            "seg_len": schedule.seg_len,
            "period": schedule.period,
        }
    return {"kind": "piecewise", "alpha1": schedule.alpha1, "budget": schedule.budget_iters}
