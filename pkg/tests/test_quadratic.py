from __future__ import annotations

import numpy as np
import pytest

from src.analysis.ensemble import loglog_slope
from src.errors import DomainError, NumericError, ShapeError
from src.sandbox.quadratic import (
    QuadraticProblem,
    averaging_convergence,
    ellipsoid_check,
    inner_mass_fraction,
    simulate_sgd,
    stationary_stats,
)


def _rotation(dim: int, seed: int) -> np.ndarray:
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((dim, dim)))
    return q


def test_problem_validation():
    with pytest.raises(DomainError):
        QuadraticProblem(np.array([[1.0, 0.0], [0.0, -1.0]]), np.zeros(2), np.eye(2))
    with pytest.raises(DomainError):
        QuadraticProblem(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), np.eye(2))
    with pytest.raises(ShapeError):
        QuadraticProblem(np.eye(3), np.zeros(2), np.eye(2))
    # zero noise is the deterministic limit
    QuadraticProblem(np.eye(2), np.zeros(2), np.zeros((2, 2)))


def test_random_problem_spectrum():
    p = QuadraticProblem.random(10, curvature=(0.5, 2.0), seed=4)
    lam = np.linalg.eigvalsh(p.A)
    assert lam[0] == pytest.approx(0.5)
    assert lam[-1] == pytest.approx(2.0)
    assert p.lambda_max == pytest.approx(2.0)
    np.testing.assert_allclose(p.noise_cov, np.eye(10))


def test_unstable_rate_rejected():
    p = QuadraticProblem.random(4, curvature=(1.0, 4.0), seed=0)
    with pytest.raises(DomainError):
        simulate_sgd(p, alpha=0.5, iters=100)
    with pytest.raises(DomainError):
        averaging_convergence(p, alpha=0.0, iters=100)


def test_burn_in_must_leave_samples():
    p = QuadraticProblem.random(2, seed=0)
    with pytest.raises(DomainError):
        simulate_sgd(p, alpha=0.1, iters=100, burn_in=100)


@pytest.mark.parametrize("alpha", [0.2, 0.5])
def test_one_dimensional_stationary_variance(alpha):
    lam, sigma = 1.0, 1.0
    p = QuadraticProblem(np.array([[lam]]), np.array([0.3]), np.array([[sigma * sigma]]))
    _, stats = simulate_sgd(p, alpha, iters=100_000, seed=2)
    expected = alpha * sigma * sigma / (lam * (2.0 - alpha * lam))
    assert stats.empirical_cov[0, 0] == pytest.approx(expected, rel=0.05)
    assert stats.empirical_mean[0] == pytest.approx(0.3, abs=0.02)


def test_noise_free_run_converges_to_optimum():
    p = QuadraticProblem(np.diag([1.0, 2.0]), np.array([1.0, -1.0]), np.zeros((2, 2)))
    iterates, _ = simulate_sgd(p, alpha=0.5, iters=200, burn_in=0)
    np.testing.assert_allclose(iterates[-1], p.w_star, atol=1e-12)


def test_results_do_not_depend_on_the_basis():
    p = QuadraticProblem.random(6, seed=1)
    q = _rotation(6, seed=9)
    base = averaging_convergence(p, alpha=0.3, iters=2000, seed=5)
    turned = averaging_convergence(p.rotated(q), alpha=0.3, iters=2000, seed=5)
    np.testing.assert_allclose(turned["mean_err"], base["mean_err"], rtol=1e-8)
    np.testing.assert_allclose(turned["raw_iterate_rms"], base["raw_iterate_rms"], rtol=1e-8)

    iters_a, _ = simulate_sgd(p, alpha=0.3, iters=500, seed=5)
    iters_b, _ = simulate_sgd(p.rotated(q), alpha=0.3, iters=500, seed=5)
    np.testing.assert_allclose(iters_b, iters_a @ q.T, atol=1e-9)


def test_gaussian_samples_sit_on_the_ellipsoid_shell(rng):
    d = 50
    mean = rng.standard_normal(d)
    root = rng.standard_normal((d, d)) / np.sqrt(d) + np.eye(d)
    samples = mean + rng.standard_normal((5000, d)) @ root.T
    stats = stationary_stats(samples, mean)
    assert ellipsoid_check(stats, d) == pytest.approx(1.0, abs=0.02)
    assert inner_mass_fraction(stats, d / 2) < 0.01


def test_ellipsoid_needs_enough_samples(rng):
    stats = stationary_stats(rng.standard_normal((50, 10)), np.zeros(10))
    with pytest.raises(DomainError):
        ellipsoid_check(stats, 10)


def test_singular_covariance_is_a_numeric_error(rng):
    samples = rng.standard_normal((200, 3))
    samples[:, 2] = 0.0
    stats = stationary_stats(samples, np.zeros(3))
    with pytest.raises(NumericError):
        ellipsoid_check(stats, 3)
    with pytest.raises(NumericError):
        inner_mass_fraction(stats, 1.0)


def test_swa_error_curve_columns(rng):
    stats = stationary_stats(rng.standard_normal((400, 2)), np.zeros(2), n_points=10)
    curve = stats.swa_error_curve
    assert list(curve.columns) == ["k", "error"]
    assert curve["k"].iloc[0] == 1 and curve["k"].iloc[-1] == 400


def test_averaging_beats_single_iterates_in_twenty_dimensions():
    p = QuadraticProblem.random(20, curvature=(0.5, 2.0), noise=1.0, seed=0)
    alpha = 0.5
    _, stats = simulate_sgd(p, alpha, iters=12_500, burn_in=2_500, seed=0)
    assert 0.9 <= ellipsoid_check(stats, p.dim) <= 1.1

    curve = averaging_convergence(p, alpha, iters=12_500, burn_in=2_500, seed=0, replicas=4, n_points=40)
    last = curve.iloc[-1]
    assert last["k"] == 10_000
    assert last["mean_err"] <= 0.1 * last["raw_iterate_rms"]
    tail = curve[curve["k"] >= 100]
    assert -0.65 <= loglog_slope(tail["k"], tail["mean_err"]) <= -0.35
