from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import ConfigError, DomainError
from src.schedules.lr import (
    Constant,
    CosineSegment,
    CyclicLinear,
    PiecewiseDecay,
    default_capture_every,
    is_capture_point,
    iters_per_epoch,
    lr_at,
    schedule_from_dict,
    schedule_to_dict,
)


def test_cyclic_examples():
    s = CyclicLinear(0.1, 0.001, 5)
    assert lr_at(s, 5) == pytest.approx(0.001)
    assert lr_at(s, 1) == pytest.approx(0.0802)
    assert lr_at(s, 6) == lr_at(s, 1)


def _cyclic_oracle(a1: float, a2: float, c: int, i: int) -> float:
    t = ((i - 1) % c + 1) / c
    return (1.0 - t) * a1 + t * a2


def test_cyclic_against_independent_formula():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a2 = float(rng.uniform(1e-4, 0.05))
        a1 = a2 + float(rng.uniform(0.0, 0.5))
        c = int(rng.integers(1, 40))
        i = int(rng.integers(1, 500))
        assert lr_at(CyclicLinear(a1, a2, c), i) == _cyclic_oracle(a1, a2, c, i)


def test_cyclic_capture_points_are_minimum_lr():
    s = CyclicLinear(0.05, 0.0005, 7)
    for i in range(1, 71):
        assert is_capture_point(s, i, s.c) == (lr_at(s, i) == pytest.approx(s.alpha2))


def test_cyclic_range_and_period():
    s = CyclicLinear(0.2, 0.01, 8)
    values = [lr_at(s, i) for i in range(1, 33)]
    assert max(values) == pytest.approx((1 - 1 / 8) * 0.2 + 0.01 / 8)
    assert all(0 < v <= 0.2 for v in values)
    assert values[:8] == values[8:16]


def test_cyclic_rejects_alpha2_above_alpha1():
    with pytest.raises(ConfigError, match="α1 ≥ α2") as err:
        CyclicLinear(0.01, 0.1, 5)
    assert err.value.key == "schedule.alpha2"


def test_piecewise_decay_shape():
    s = PiecewiseDecay(0.1, budget_iters=100)
    assert lr_at(s, 1) == 0.1
    assert lr_at(s, 50) == 0.1
    assert lr_at(s, 96) == pytest.approx(0.001)
    values = [lr_at(s, i) for i in range(1, 101)]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(0.001)


def test_piecewise_uses_iterations_not_epochs():
    s = PiecewiseDecay(0.1, budget_iters=1000)
    assert lr_at(s, 950, iters_per_epoch=10) == lr_at(s, 950, iters_per_epoch=1)


def test_cosine_segment_follows_epochs():
    s = CosineSegment()
    first = 0.1 * (1 + math.cos(math.pi * 1600 / 1800))
    assert lr_at(s, 1, iters_per_epoch=10) == pytest.approx(first)
    assert lr_at(s, 10, iters_per_epoch=10) == pytest.approx(first)
    assert lr_at(s, 11, iters_per_epoch=10) == pytest.approx(0.1 * (1 + math.cos(math.pi * 1601 / 1800)))
    # segment repeats after seg_len epochs
    assert lr_at(s, 100 * 10 + 1, iters_per_epoch=10) == pytest.approx(first)


def test_constant():
    assert lr_at(Constant(0.3), 12345) == 0.3
    with pytest.raises(ConfigError):
        Constant(0.0)


def test_iteration_counter_is_one_based():
    with pytest.raises(DomainError):
        lr_at(Constant(0.1), 0)


def test_default_capture_every():
    assert default_capture_every(CyclicLinear(0.1, 0.01, 9), 20) == 9
    assert default_capture_every(Constant(0.1), 20) == 20
    assert iters_per_epoch(1000, 128) == 7
    assert iters_per_epoch(10, 50) == 1


@pytest.mark.parametrize(
    "raw",
    [
        {"kind": "constant", "alpha1": 0.05},
        {"kind": "cyclic", "alpha1": 0.05, "alpha2": 0.0005, "cycle": 50},
        {"kind": "cosine", "base": 0.1, "seg_start": 1600, "seg_len": 100, "period": 1800},
        {"kind": "piecewise", "alpha1": 0.05, "budget": 300},
    ],
)
def test_schedule_dict_roundtrip(raw):
    assert schedule_to_dict(schedule_from_dict(raw)) == raw


def test_piecewise_budget_defaults():
    assert schedule_from_dict({"kind": "piecewise", "alpha1": 0.1}, default_budget=400).budget_iters == 400


def test_unknown_kind():
    with pytest.raises(ConfigError) as err:
        schedule_from_dict({"kind": "step"})
    assert err.value.key == "schedule.kind"
