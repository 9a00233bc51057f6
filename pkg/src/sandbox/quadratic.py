"""Constant-LR SGD on a noisy quadratic.

The loss is 0.5 (w - w*)^T A (w - w*) and each gradient carries additive
Gaussian noise with covariance `noise_cov`. Iterates are propagated in the
eigenbasis of A (a diagonal recursion) with eigenvector signs fixed against
w*, so results do not depend on the basis the problem is written in.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from src.errors import DomainError, NumericError, ShapeError

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]


def _is_spd(m: Array) -> bool:
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


@dataclass(frozen=True)
class QuadraticProblem:
    A: Array
    w_star: Array
    noise_cov: Array

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        w_star = np.atleast_1d(np.asarray(self.w_star, dtype=np.float64))
        noise = np.atleast_2d(np.asarray(self.noise_cov, dtype=np.float64))
        d = w_star.size
        if A.shape != (d, d) or noise.shape != (d, d):
            raise ShapeError(f"A {A.shape} and noise_cov {noise.shape} must both be ({d}, {d})")
        for name, m in (("A", A), ("noise_cov", noise)):
            if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(m).max()))):
                raise DomainError(f"{name} must be symmetric")
        A = 0.5 * (A + A.T)
        noise = 0.5 * (noise + noise.T)
        if not _is_spd(A):
            raise DomainError("A must be symmetric positive-definite")
        # an all-zero noise covariance is accepted as the noise-free limit
        if np.any(noise) and not _is_spd(noise):
            raise DomainError("noise_cov must be symmetric positive-definite (or exactly zero)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "w_star", w_star)
        object.__setattr__(self, "noise_cov", noise)

    @property
    def dim(self) -> int:
        return int(self.w_star.size)

    @property
    def lambda_max(self) -> float:
        return float(np.linalg.eigvalsh(self.A)[-1])

    @classmethod
    def random(
        cls,
        dim: int,
        *,
        curvature: Tuple[float, float] = (0.5, 2.0),
        noise: float = 1.0,
        seed: int = 0,
    ) -> "QuadraticProblem":
        """Randomly rotated problem, curvature spectrum log-spaced over `curvature`, isotropic noise."""
        rng = np.random.default_rng(seed)
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
        q = q * np.sign(np.diag(r))
        lam = np.geomspace(curvature[0], curvature[1], dim)
        return cls(
            A=(q * lam) @ q.T,
            w_star=rng.standard_normal(dim),
            noise_cov=noise * noise * np.eye(dim),
        )

    def rotated(self, q: Array) -> "QuadraticProblem":
        return QuadraticProblem(q @ self.A @ q.T, q @ self.w_star, q @ self.noise_cov @ q.T)


@dataclass(frozen=True)
class _Eigenframe:
    lam: Array
    V: Array
    noise_factor: Array


def _eigenframe(p: QuadraticProblem) -> _Eigenframe:
    lam, V = np.linalg.eigh(p.A)
    proj = V.T @ p.w_star
    fallback = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(p.dim)])
    tol = 1e-12 * max(float(np.linalg.norm(p.w_star)), 1e-300)
    signs = np.where(np.abs(proj) > tol, np.sign(proj), fallback)
    V = V * signs
    if np.any(p.noise_cov):
        n_eig = V.T @ p.noise_cov @ V
        factor = np.linalg.cholesky(0.5 * (n_eig + n_eig.T))
    else:
        factor = np.zeros((p.dim, p.dim))
    return _Eigenframe(lam, V, factor)


def _check_alpha(p: QuadraticProblem, alpha: float) -> None:
    limit = 2.0 / p.lambda_max
    if not 0.0 < alpha < limit:
        raise DomainError(f"learning rate {alpha} is outside the stable range (0, {limit:.6g})")


def _deviations(
    p: QuadraticProblem,
    frame: _Eigenframe,
    alpha: float,
    iters: int,
    rng: np.random.Generator,
    start: Optional[Array],
) -> Array:
    """w_t - w* in eigen-coordinates for t = 1..iters."""
    w0 = np.zeros(p.dim) if start is None else np.asarray(start, dtype=np.float64)
    e = frame.V.T @ (w0 - p.w_star)
    xi = rng.standard_normal((iters, p.dim)) @ frame.noise_factor.T
    decay = 1.0 - alpha * frame.lam
    out = np.empty((iters, p.dim))
    for t in range(iters):
        e = decay * e - alpha * xi[t]
        out[t] = e
    return out


def _log_ks(n: int, n_points: int) -> NDArray[np.int64]:
    return np.unique(np.geomspace(1, n, n_points).astype(np.int64))


@dataclass(frozen=True)
class StationaryStats:
    n_samples: int
    empirical_mean: Array
    empirical_cov: Array
    mahalanobis_sq: Optional[Array]
    mahalanobis_sq_mean: float
    raw_rms: float
    swa_error_curve: pd.DataFrame


def stationary_stats(samples: Array, w_star: Array, n_points: int = 40) -> StationaryStats:
    """Moments of `samples`, squared Mahalanobis distances of each sample from
    w_star under the empirical covariance, and the running-average error curve."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise DomainError("need a (n >= 2, d) sample matrix")
    w_star = np.asarray(w_star, dtype=np.float64)
    n = samples.shape[0]
    diff = samples - w_star
    cov = np.atleast_2d(np.cov(samples, rowvar=False))

    m2: Optional[Array]
    try:
        chol = np.linalg.cholesky(cov)
        m2 = (np.linalg.solve(chol, diff.T) ** 2).sum(axis=0)
        m2_mean = float(m2.mean())
    except np.linalg.LinAlgError:
        m2, m2_mean = None, float("nan")

    ks = _log_ks(n, n_points)
    running = np.cumsum(diff, axis=0)[ks - 1] / ks[:, None]
    curve = pd.DataFrame({"k": ks, "error": np.linalg.norm(running, axis=1)})
    return StationaryStats(
        n_samples=n,
        empirical_mean=samples.mean(axis=0),
        empirical_cov=cov,
        mahalanobis_sq=m2,
        mahalanobis_sq_mean=m2_mean,
        raw_rms=float(np.sqrt((diff * diff).sum(axis=1).mean())),
        swa_error_curve=curve,
    )


def simulate_sgd(
    p: QuadraticProblem,
    alpha: float,
    iters: int,
    burn_in: Optional[int] = None,
    seed: int = 0,
    start: Optional[Array] = None,
) -> Tuple[Array, StationaryStats]:
    """Iterates w <- w - alpha (A (w - w*) + xi) after burn-in, with their statistics.
    The default start is the origin."""
    _check_alpha(p, alpha)
    burn_in = int(0.2 * iters) if burn_in is None else int(burn_in)
    if not 0 <= burn_in < iters:
        raise DomainError(f"burn_in must lie in [0, iters), got burn_in={burn_in}, iters={iters}")
    frame = _eigenframe(p)
    dev = _deviations(p, frame, alpha, iters, np.random.default_rng(seed), start)[burn_in:]
    iterates = p.w_star + dev @ frame.V.T
    stats = stationary_stats(iterates, p.w_star)
    logger.info(
        "Quadratic SGD simulated | dim=%d | alpha=%g | iters=%d | burn_in=%d | m2_mean=%.4g",
        p.dim, alpha, iters, burn_in, stats.mahalanobis_sq_mean,
    )
    return iterates, stats


def ellipsoid_check(stats: StationaryStats, d: int) -> float:
    """Mean squared Mahalanobis distance over d; close to 1 for Gaussian samples."""
    if stats.n_samples < 10 * d:
        raise DomainError(f"need at least {10 * d} samples for dimension {d}, got {stats.n_samples}")
    if not np.isfinite(stats.mahalanobis_sq_mean):
        raise NumericError("empirical covariance is singular; collect more samples or add gradient noise")
    return stats.mahalanobis_sq_mean / d


def inner_mass_fraction(stats: StationaryStats, radius_sq: float) -> float:
    """Fraction of samples whose squared Mahalanobis distance is below `radius_sq`."""
    if stats.mahalanobis_sq is None:
        raise NumericError("empirical covariance is singular; collect more samples")
    return float(np.mean(stats.mahalanobis_sq < radius_sq))


def averaging_convergence(
    p: QuadraticProblem,
    alpha: float,
    iters: int,
    seed: int = 0,
    *,
    burn_in: Optional[int] = None,
    replicas: int = 1,
    n_points: int = 30,
) -> pd.DataFrame:
    """Error of the running iterate average against the number of averaged
    iterates k (log-spaced), averaged over independent replicas."""
    _check_alpha(p, alpha)
    burn_in = int(0.2 * iters) if burn_in is None else int(burn_in)
    if not 0 <= burn_in < iters:
        raise DomainError(f"burn_in must lie in [0, iters), got burn_in={burn_in}, iters={iters}")
    if replicas < 1:
        raise DomainError(f"replicas must be >= 1, got {replicas}")

    frame = _eigenframe(p)
    n = iters - burn_in
    ks = _log_ks(n, n_points)
    errs = np.zeros(ks.size)
    rms = np.zeros(ks.size)
    mean_dist = np.zeros(ks.size)
    children = np.random.SeedSequence(seed).spawn(replicas)
    for child in children:
        dev = _deviations(p, frame, alpha, iters, np.random.default_rng(child), None)[burn_in:]
        dist_sq = (dev * dev).sum(axis=1)
        running = np.cumsum(dev, axis=0)[ks - 1] / ks[:, None]
        errs += np.linalg.norm(running, axis=1)
        rms += np.sqrt(np.cumsum(dist_sq)[ks - 1] / ks)
        mean_dist += np.cumsum(np.sqrt(dist_sq))[ks - 1] / ks
    return pd.DataFrame(
        {
            "k": ks,
            "mean_err": errs / replicas,
            "raw_iterate_rms": rms / replicas,
            "raw_iterate_mean": mean_dist / replicas,
        }
    )
