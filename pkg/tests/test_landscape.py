from __future__ import annotations

import logging
from typing import List

import numpy as np
import pytest

from src.analysis.evaluation import ModelEvaluator, PointMetrics
from src.analysis.landscape import (
    default_grid,
    evaluate_grid,
    plane_from_points,
    project_trajectory,
    ray_offsets,
    ray_profile,
    segment_minimizers,
    segment_profile,
    width_metric,
)
from src.errors import DegenerateBasisError, DomainError
from src.model.spec import init_state


class QuadraticEvaluator:
    """Train loss 0.5*c*|w - a|^2, test error 0.5*|w - b|^2; records the call order."""

    def __init__(self, dim: int, curvature: float = 1.0, train_at=None, test_at=None) -> None:
        self.curvature = curvature
        self.train_at = np.zeros(dim) if train_at is None else np.asarray(train_at, dtype=np.float64)
        self.test_at = np.zeros(dim) if test_at is None else np.asarray(test_at, dtype=np.float64)
        self.n_evaluations = 0
        self.calls: List[np.ndarray] = []

    def __call__(self, params) -> PointMetrics:
        self.n_evaluations += 1
        self.calls.append(np.array(params))
        d = params - self.train_at
        e = params - self.test_at
        return PointMetrics(0.5 * self.curvature * float(d @ d), 0.5 * float(e @ e))


def test_plane_anchor_coordinates(rng):
    w1, w2, w3 = (rng.standard_normal(30) for _ in range(3))
    basis = plane_from_points(w1, w2, w3)
    assert abs(basis.u_hat @ basis.v_hat) <= 1e-12
    assert np.linalg.norm(basis.u_hat) == pytest.approx(1.0)
    assert basis.project(w1) == pytest.approx((0.0, 0.0), abs=1e-12)
    assert basis.project(w2) == pytest.approx((np.linalg.norm(w2 - w1), 0.0), abs=1e-12)
    x3, y3 = basis.project(w3)
    assert (x3, y3) == pytest.approx(basis.anchors["w3"], abs=1e-12)
    assert basis.residual(w3) == pytest.approx(0.0, abs=1e-10)
    np.testing.assert_allclose(basis.point(x3, y3), w3, atol=1e-10)


def test_plane_degenerate_inputs(rng):
    w1, w3 = rng.standard_normal(10), rng.standard_normal(10)
    with pytest.raises(DegenerateBasisError):
        plane_from_points(w1, w1.copy(), w3)
    w2 = rng.standard_normal(10)
    with pytest.raises(DegenerateBasisError):
        plane_from_points(w1, w2, w1 + 2.5 * (w2 - w1))


def test_grid_order_and_values(rng):
    w1, w2, w3 = (rng.standard_normal(5) for _ in range(3))
    basis = plane_from_points(w1, w2, w3)
    ev = QuadraticEvaluator(5)
    xs, ys = np.linspace(-1, 2, 4), np.linspace(-0.5, 1.5, 3)
    surface = evaluate_grid(basis, ev, xs, ys)
    assert surface.train_loss.shape == (4, 3)
    assert ev.n_evaluations == 12
    # x is the outer loop
    np.testing.assert_allclose(ev.calls[1], basis.point(xs[0], ys[1]))
    for i in range(4):
        for j in range(3):
            p = basis.point(xs[i], ys[j])
            assert surface.train_loss[i, j] == pytest.approx(0.5 * p @ p)
    frame = surface.to_frame()
    assert len(frame) == 12
    assert frame.loc[1, "x"] == xs[0] and frame.loc[1, "y"] == ys[1]


def test_default_grid_covers_anchors(rng):
    basis = plane_from_points(*(rng.standard_normal(8) for _ in range(3)))
    xs, ys = default_grid(basis, resolution=25, pad=0.2)
    assert xs.size == ys.size == 25
    for x, y in basis.anchors.values():
        assert xs[0] <= x <= xs[-1]
        assert ys[0] <= y <= ys[-1]


def test_project_trajectory_in_plane_points(rng):
    w1, w2, w3 = (rng.standard_normal(6) for _ in range(3))
    basis = plane_from_points(w1, w2, w3)
    mid = 0.5 * (w1 + w2)
    frame = project_trajectory(basis, QuadraticEvaluator(6), [(0, w1), (10, mid), (20, w3)])
    assert frame["residual"].abs().max() < 1e-10
    assert frame.loc[1, "x"] == pytest.approx(0.5 * np.linalg.norm(w2 - w1))


def test_width_on_isotropic_quadratic():
    ts = ray_offsets(5.0, 1001)
    profiles = ray_profile(np.zeros(12), QuadraticEvaluator(12), 4, ts, seed=0)
    assert len(profiles) == 4
    np.testing.assert_array_equal(profiles[0].distances, ts)
    for delta in (0.1, 0.3, 1.0):
        est = width_metric(profiles, delta)
        assert est.value == pytest.approx(np.sqrt(2 * delta), rel=1e-3)
        assert est.capped_rays == 0


def test_sharper_minimum_is_narrower():
    ts = ray_offsets(3.0, 301)
    flat = width_metric(ray_profile(np.zeros(8), QuadraticEvaluator(8, 1.0), 3, ts, seed=1), 0.3)
    sharp = width_metric(ray_profile(np.zeros(8), QuadraticEvaluator(8, 10.0), 3, ts, seed=1), 0.3)
    assert sharp.value < flat.value


def test_width_capped_at_grid_edge(caplog):
    caplog.set_level(logging.WARNING)
    ts = ray_offsets(1.0, 21)
    est = width_metric(ray_profile(np.zeros(4), QuadraticEvaluator(4), 3, ts, seed=0), delta=100.0)
    assert est.capped_rays == 3
    assert est.value == 1.0
    assert "Width capped" in caplog.text


def test_width_and_rays_reject_bad_input():
    ts_no_zero = np.linspace(-1.0, 1.0, 10)
    with pytest.raises(DomainError):
        ray_profile(np.zeros(3), QuadraticEvaluator(3), 2, ts_no_zero, seed=0)
    profiles = ray_profile(np.zeros(3), QuadraticEvaluator(3), 2, ray_offsets(1.0, 10), seed=0)
    with pytest.raises(DomainError):
        width_metric(profiles, 0.0)


def test_segment_minimizers_find_both_optima():
    w_a, w_b = np.zeros(3), np.array([4.0, 0.0, 0.0])
    ev = QuadraticEvaluator(3, train_at=0.25 * w_b, test_at=0.75 * w_b)
    ts = np.linspace(-0.5, 1.5, 41)
    profile = segment_profile(w_a, w_b, ev, ts)
    t_loss, t_err = segment_minimizers(profile)
    assert t_loss == pytest.approx(0.25)
    assert t_err == pytest.approx(0.75)
    np.testing.assert_allclose(profile.distances, ts * 4.0)
    assert profile.train_loss[np.argmin(np.abs(ts))] == pytest.approx(ev(w_a).train_loss)


def test_degenerate_segment_warns(caplog):
    caplog.set_level(logging.WARNING)
    w = np.ones(3)
    profile = segment_profile(w, w.copy(), QuadraticEvaluator(3), np.linspace(0, 1, 3))
    assert "Degenerate segment" in caplog.text
    np.testing.assert_array_equal(profile.distances, 0.0)


def test_model_evaluator_recomputes_bn(bn_spec, small_split):
    ev = ModelEvaluator(bn_spec, small_split)
    m = ev(init_state(bn_spec, seed=0).params)
    assert ev.n_evaluations == 1
    assert not m.saturated
    assert 0.0 <= m.test_error <= 1.0
    assert ev.state_at(init_state(bn_spec, seed=0).params).bn_stats[0].running_var.min() > 0


def test_model_evaluator_saturates_far_points(plain_spec, small_split):
    ev = ModelEvaluator(plain_spec, small_split, cap=10.0)
    m = ev(np.full(plain_spec.n_params, 1e3))
    assert m.saturated
    assert m.train_loss == 10.0


def test_ray_offsets_hold_exact_zero():
    ts = ray_offsets(20.0, 40)
    assert ts.size == 41
    assert ts[20] == 0.0
    assert ts[0] == -20.0 and ts[-1] == 20.0
    with pytest.raises(DomainError):
        ray_offsets(0.0, 11)
