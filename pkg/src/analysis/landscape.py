from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from tqdm import tqdm

from src.errors import DegenerateBasisError, DomainError, ShapeError
from src.model.spec import ParamVector

from .evaluation import PointEvaluator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlaneBasis:
    """Orthonormal coordinates for the plane through three weight vectors."""

    origin: ParamVector
    u_hat: ParamVector
    v_hat: ParamVector
    u_norm: float
    v_norm: float
    w3_x: float

    def point(self, x: float, y: float) -> ParamVector:
        return self.origin + x * self.u_hat + y * self.v_hat

    def project(self, w: ParamVector) -> Tuple[float, float]:
        d = np.asarray(w, dtype=np.float64) - self.origin
        return float(d @ self.u_hat), float(d @ self.v_hat)

    def residual(self, w: ParamVector) -> float:
        x, y = self.project(w)
        return float(np.linalg.norm(np.asarray(w) - self.point(x, y)))

    @property
    def anchors(self) -> Dict[str, Tuple[float, float]]:
        return {"w1": (0.0, 0.0), "w2": (self.u_norm, 0.0), "w3": (self.w3_x, self.v_norm)}


def plane_from_points(w1: ParamVector, w2: ParamVector, w3: ParamVector) -> PlaneBasis:
    w1, w2, w3 = (np.asarray(w, dtype=np.float64) for w in (w1, w2, w3))
    if not (w1.shape == w2.shape == w3.shape):
        raise ShapeError(f"plane anchors differ in shape: {w1.shape}, {w2.shape}, {w3.shape}")

    u = w2 - w1
    u_norm = float(np.linalg.norm(u))
    if u_norm == 0.0 or u_norm <= 1e-12 * max(1.0, float(np.linalg.norm(w1))):
        raise DegenerateBasisError("w1 and w2 coincide; no plane direction")
    u_hat = u / u_norm

    d3 = w3 - w1
    v = d3 - (d3 @ u) / (u_norm * u_norm) * u
    v_norm = float(np.linalg.norm(v))
    if v_norm == 0.0 or v_norm <= 1e-10 * max(1.0, float(np.linalg.norm(d3))):
        raise DegenerateBasisError("w3 lies on the line through w1 and w2")
    v_hat = v / v_norm
    # one extra Gram-Schmidt sweep for round-off
    v_hat = v_hat - (v_hat @ u_hat) * u_hat
    v_hat = v_hat / np.linalg.norm(v_hat)

    return PlaneBasis(
        origin=w1,
        u_hat=u_hat,
        v_hat=v_hat,
        u_norm=u_norm,
        v_norm=float(d3 @ v_hat),
        w3_x=float(d3 @ u_hat),
    )


@dataclass(frozen=True)
class GridSurface:
    """`train_loss[i, j]` and `test_error[i, j]` belong to the point (xs[i], ys[j])."""

    xs: NDArray[np.float64]
    ys: NDArray[np.float64]
    train_loss: NDArray[np.float64]
    test_error: NDArray[np.float64]
    saturated: NDArray[np.bool_]
    anchors: Dict[str, Tuple[float, float]]

    def to_frame(self) -> pd.DataFrame:
        xx, yy = np.meshgrid(self.xs, self.ys, indexing="ij")
        return pd.DataFrame(
            {
                "x": xx.ravel(),
                "y": yy.ravel(),
                "train_loss": self.train_loss.ravel(),
                "test_err": self.test_error.ravel(),
                "saturated": self.saturated.ravel(),
            }
        )


def default_grid(basis: PlaneBasis, resolution: int = 25, pad: float = 0.2) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """A resolution x resolution grid over the anchors, padded by `pad` of the span on each side."""
    coords = np.array(list(basis.anchors.values()))
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    lo, hi = lo - pad * span, hi + pad * span
    return np.linspace(lo[0], hi[0], resolution), np.linspace(lo[1], hi[1], resolution)


def evaluate_grid(
    basis: PlaneBasis,
    evaluator: PointEvaluator,
    xs: Sequence[float],
    ys: Sequence[float],
    *,
    progress: bool = False,
) -> GridSurface:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size == 0 or ys.size == 0:
        raise DomainError("grid must contain at least one point")

    loss = np.empty((xs.size, ys.size))
    err = np.empty((xs.size, ys.size))
    sat = np.zeros((xs.size, ys.size), dtype=bool)
    cells = [(i, j) for i in range(xs.size) for j in range(ys.size)]
    for i, j in tqdm(cells, disable=not progress, desc="plane", leave=False):
        m = evaluator(basis.point(xs[i], ys[j]))
        loss[i, j], err[i, j], sat[i, j] = m.train_loss, m.test_error, m.saturated
    if sat.any():
        logger.warning("Grid has saturated points | count=%d | total=%d", int(sat.sum()), sat.size)
    return GridSurface(xs, ys, loss, err, sat, basis.anchors)


def project_trajectory(
    basis: PlaneBasis,
    evaluator: PointEvaluator,
    points: Sequence[Tuple[int, ParamVector]],
) -> pd.DataFrame:
    """Plane coordinates of (iteration, weights) pairs next to their true metrics;
    the residual column says how far each point sits off the plane."""
    rows = []
    for iteration, w in points:
        x, y = basis.project(w)
        m = evaluator(w)
        rows.append(
            {
                "iteration": iteration,
                "x": x,
                "y": y,
                "residual": basis.residual(w),
                "train_loss": m.train_loss,
                "test_err": m.test_error,
            }
        )
    return pd.DataFrame(rows, columns=["iteration", "x", "y", "residual", "train_loss", "test_err"])


@dataclass(frozen=True)
class RayProfile:
    direction: ParamVector
    ts: NDArray[np.float64]
    distances: NDArray[np.float64]
    train_loss: NDArray[np.float64]
    test_error: NDArray[np.float64]
    saturated: NDArray[np.bool_]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.ts,
                "dist": self.distances,
                "train_loss": self.train_loss,
                "test_err": self.test_error,
                "saturated": self.saturated,
            }
        )


def _profile(points: Sequence[ParamVector], evaluator: PointEvaluator) -> Tuple[NDArray, NDArray, NDArray]:
    metrics = [evaluator(p) for p in points]
    return (
        np.array([m.train_loss for m in metrics]),
        np.array([m.test_error for m in metrics]),
        np.array([m.saturated for m in metrics], dtype=bool),
    )


def sample_unit_directions(dim: int, n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Rows uniform on the unit sphere: normalized standard Gaussians."""
    g = rng.standard_normal((n, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ray_offsets(t_max: float, n_ts: int) -> NDArray[np.float64]:
    """Symmetric offsets in [-t_max, t_max]; the count is made odd so t = 0 is on the grid exactly."""
    if not t_max > 0:
        raise DomainError(f"t_max must be > 0, got {t_max}")
    ts = np.linspace(-t_max, t_max, int(n_ts) | 1)
    ts[ts.size // 2] = 0.0
    return ts


def ray_profile(
    center: ParamVector,
    evaluator: PointEvaluator,
    n_rays: int,
    ts: Sequence[float],
    seed: int,
) -> List[RayProfile]:
    if n_rays < 1:
        raise DomainError(f"n_rays must be >= 1, got {n_rays}")
    ts = np.asarray(ts, dtype=np.float64)
    if not np.any(ts == 0.0):
        raise DomainError("ray offsets must include t = 0")
    center = np.asarray(center, dtype=np.float64)

    rng = np.random.default_rng(seed)
    out: List[RayProfile] = []
    for d in sample_unit_directions(center.size, n_rays, rng):
        loss, err, sat = _profile([center + t * d for t in ts], evaluator)
        out.append(RayProfile(d, ts, ts.copy(), loss, err, sat))
    return out


def segment_profile(
    w_a: ParamVector,
    w_b: ParamVector,
    evaluator: PointEvaluator,
    ts: Sequence[float],
) -> RayProfile:
    """Points t*w_b + (1 - t)*w_a: t=0 is w_a, t=1 is w_b."""
    w_a = np.asarray(w_a, dtype=np.float64)
    w_b = np.asarray(w_b, dtype=np.float64)
    if w_a.shape != w_b.shape:
        raise ShapeError(f"segment endpoints differ in shape: {w_a.shape} vs {w_b.shape}")
    ts = np.asarray(ts, dtype=np.float64)
    if ts.min() < -0.5 or ts.max() > 1.5:
        logger.info("Segment extends past the recommended range | t_min=%g | t_max=%g", ts.min(), ts.max())

    diff = w_b - w_a
    length = float(np.linalg.norm(diff))
    if length == 0.0:
        logger.warning("Degenerate segment | endpoints are identical")
        direction = np.zeros_like(diff)
    else:
        direction = diff / length

    loss, err, sat = _profile([t * w_b + (1.0 - t) * w_a for t in ts], evaluator)
    return RayProfile(direction, ts, ts * length, loss, err, sat)


def segment_minimizers(profile: RayProfile) -> Tuple[float, float]:
    """t of the train-loss minimum and of the test-error minimum (mean t over ties)."""
    t_loss = float(profile.ts[int(np.argmin(profile.train_loss))])
    best = profile.test_error.min()
    t_err = float(profile.ts[profile.test_error == best].mean())
    return t_loss, t_err


@dataclass(frozen=True)
class WidthEstimate:
    value: float
    per_ray: Tuple[float, ...]
    capped_rays: int

    def __float__(self) -> float:
        return self.value


def _first_crossing(t_abs: NDArray, rise: NDArray, delta: float) -> Optional[float]:
    for k in range(1, t_abs.size):
        if rise[k] >= delta:
            if rise[k] == delta:
                return float(t_abs[k])
            t0, t1, r0, r1 = t_abs[k - 1], t_abs[k], rise[k - 1], rise[k]
            return float(t0 + (delta - r0) * (t1 - t0) / (r1 - r0))
    return None


def width_metric(profiles: Sequence[RayProfile], delta: float) -> WidthEstimate:
    """Mean over rays of the smallest |t| where train loss rises by `delta` above t=0."""
    if not delta > 0:
        raise DomainError(f"delta must be > 0, got {delta}")
    if not profiles:
        raise DomainError("width needs at least one profile")
    ts = profiles[0].ts
    if any(p.ts.shape != ts.shape or not np.array_equal(p.ts, ts) for p in profiles):
        raise DomainError("profiles must share one t grid")
    zero = np.flatnonzero(ts == 0.0)
    if zero.size == 0:
        raise DomainError("profiles must include t = 0")
    t_max = float(np.abs(ts).max())

    pos = np.flatnonzero(ts >= 0.0)
    pos = pos[np.argsort(ts[pos])]
    neg = np.flatnonzero(ts <= 0.0)
    neg = neg[np.argsort(-ts[neg])]

    widths: List[float] = []
    capped = 0
    for p in profiles:
        rise = p.train_loss - p.train_loss[zero[0]]
        hits = [
            c
            for c in (
                _first_crossing(np.abs(ts[pos]), rise[pos], delta),
                _first_crossing(np.abs(ts[neg]), rise[neg], delta),
            )
            if c is not None
        ]
        if hits:
            widths.append(min(hits))
        else:
            widths.append(t_max)
            capped += 1
    if capped:
        logger.warning("Width capped at grid edge | rays=%d/%d | delta=%g | t_max=%g", capped, len(profiles), delta, t_max)
    return WidthEstimate(float(np.mean(widths)), tuple(widths), capped)
