from __future__ import annotations

import numpy as np
import pytest

from src.analysis.ensemble import (
    SnapshotSet,
    ensemble_predict,
    gap_report,
    loglog_slope,
    random_directions,
    scaling_law_check,
)
from src.errors import DomainError
from src.model.batch import Batch
from src.model.network import predict_proba
from src.model.spec import MlpSpec, init_state


@pytest.fixture
def tanh_spec() -> MlpSpec:
    return MlpSpec((2, 16, 3), activation="tanh")


def test_ensemble_is_mean_of_member_probabilities(tanh_spec, rng):
    members = [init_state(tanh_spec, seed=s).params for s in range(4)]
    snaps = SnapshotSet.from_params(tanh_spec, members)
    batch = Batch(rng.standard_normal((20, 2)), np.zeros(20, dtype=np.int64))
    expected = np.mean([predict_proba(s, batch.inputs) for s in snaps.member_states], axis=0)
    np.testing.assert_allclose(ensemble_predict(snaps, batch), expected, rtol=0, atol=1e-15)
    np.testing.assert_allclose(snaps.center, np.mean(members, axis=0))
    np.testing.assert_allclose(np.sum(snaps.deltas, axis=0), 0.0, atol=1e-14)


def test_empty_snapshot_set(tanh_spec):
    with pytest.raises(DomainError):
        SnapshotSet.from_params(tanh_spec, [])


def test_bn_members_need_data(bn_spec):
    snaps = SnapshotSet.from_params(bn_spec, [init_state(bn_spec, seed=0).params])
    with pytest.raises(DomainError):
        snaps.center_state


def test_gap_report_on_identical_models(small_split):
    spec = MlpSpec((2, 16, 2), activation="tanh")
    p = init_state(spec, seed=0).params
    report = gap_report(SnapshotSet.from_params(spec, [p, p, p]), small_split.test)
    assert report.ens_vs_center == pytest.approx(0.0, abs=1e-12)
    assert report.consecutive_gaps == pytest.approx([0.0, 0.0], abs=1e-12)
    assert report.agreement_frac == 1.0
    assert report.consecutive_agreement == [1.0, 1.0]
    frame = report.to_frame()
    assert list(frame.columns) == ["pair", "gap", "agreement"]
    assert frame["pair"].tolist()[:3] == ["0-1", "1-2", "ens_vs_center"]


def test_gap_report_needs_two_models(small_split):
    spec = MlpSpec((2, 4, 2))
    with pytest.raises(DomainError):
        gap_report(SnapshotSet.from_params(spec, [init_state(spec, seed=0).params]), small_split.test)


def test_random_directions_are_centered_and_bounded():
    dirs = random_directions(50, 5, seed=3)
    assert len(dirs) == 5
    np.testing.assert_allclose(np.sum(dirs, axis=0), 0.0, atol=1e-12)
    assert max(np.linalg.norm(d) for d in dirs) == pytest.approx(1.0)


def test_scaling_gaps_grow_first_and_second_order(tanh_spec, rng):
    center = init_state(tanh_spec, seed=1)
    batch = Batch(rng.standard_normal((200, 2)), np.zeros(200, dtype=np.int64))
    eps = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    table = scaling_law_check(center, random_directions(tanh_spec.n_params, 5, seed=0), eps, batch)
    assert list(table.columns) == ["eps", "first_order_gap", "second_order_gap"]
    assert 0.9 <= loglog_slope(table["eps"], table["first_order_gap"]) <= 1.1
    assert 1.8 <= loglog_slope(table["eps"], table["second_order_gap"]) <= 2.2


def test_zero_eps_gives_zero_gaps(tanh_spec, rng):
    center = init_state(tanh_spec, seed=1)
    batch = Batch(rng.standard_normal((10, 2)), np.zeros(10, dtype=np.int64))
    table = scaling_law_check(center, random_directions(tanh_spec.n_params, 3, seed=0), [0.0], batch)
    assert table.loc[0, "first_order_gap"] == 0.0
    assert table.loc[0, "second_order_gap"] == 0.0


def test_uncentered_directions_rejected(tanh_spec, rng):
    center = init_state(tanh_spec, seed=1)
    batch = Batch(rng.standard_normal((10, 2)), np.zeros(10, dtype=np.int64))
    dirs = [np.ones(tanh_spec.n_params), np.ones(tanh_spec.n_params)]
    with pytest.raises(DomainError):
        scaling_law_check(center, dirs, [0.1], batch)


def test_loglog_slope_of_power_law():
    xs = np.array([0.1, 0.2, 0.5, 1.0])
    assert loglog_slope(xs, 3.0 * xs**2) == pytest.approx(2.0)
