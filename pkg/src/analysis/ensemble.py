from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, Field

from src.errors import DomainError, ShapeError
from src.model.batch import Batch, Dataset
from src.model.network import predict_labels, predict_proba, recompute_bn_stats
from src.model.spec import MlpSpec, MlpState, ParamVector, check_params, default_bn_stats

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SnapshotSet:
    """Snapshots w_i of one architecture, their mean (the SWA center) and
    offsets from it. `bn_data` feeds each member's BN statistics pass."""

    spec: MlpSpec
    models: Tuple[ParamVector, ...]
    center: ParamVector
    deltas: Tuple[ParamVector, ...]
    bn_data: Optional[Dataset] = field(default=None, compare=False)

    @classmethod
    def from_params(
        cls,
        spec: MlpSpec,
        params: Sequence[ParamVector],
        bn_data: Optional[Dataset] = None,
    ) -> "SnapshotSet":
        if not params:
            raise DomainError("snapshot set is empty")
        models = tuple(check_params(spec, np.asarray(p, dtype=np.float64)) for p in params)
        center = np.mean(np.stack(models), axis=0)
        deltas = tuple(m - center for m in models)
        return cls(spec, models, center, deltas, bn_data)

    def __len__(self) -> int:
        return len(self.models)

    def _state(self, params: ParamVector) -> MlpState:
        state = MlpState(self.spec, params, default_bn_stats(self.spec))
        if not self.spec.bn_layers:
            return state
        if self.bn_data is None:
            raise DomainError("snapshot set has BN layers but no data for the statistics pass")
        return recompute_bn_stats(state, self.bn_data.batches())

    @cached_property
    def member_states(self) -> Tuple[MlpState, ...]:
        return tuple(self._state(m) for m in self.models)

    @cached_property
    def center_state(self) -> MlpState:
        return self._state(self.center)


def ensemble_predict(snapshots: SnapshotSet, batch: Batch) -> NDArray[np.float64]:
    """Mean of the members' class probabilities, summed in snapshot order."""
    if len(snapshots) == 0:
        raise DomainError("cannot ensemble an empty snapshot set")
    total = np.zeros((len(batch), snapshots.spec.output_dim))
    for state in snapshots.member_states:
        total += predict_proba(state, batch.inputs)
    return total / len(snapshots)


class PredictionGap(BaseModel):
    """Prediction-space distances: per-example L2 norm of probability differences, averaged."""

    ens_vs_center: float = Field(..., ge=0, description="mean ||f_bar - f(w_SWA)||")
    consecutive_gaps: List[float] = Field(..., description="mean ||f(w_i) - f(w_i+1)||, capture order")
    agreement_frac: float = Field(..., ge=0, le=1, description="label agreement of center and ensemble")
    consecutive_agreement: List[float] = Field(default_factory=list)
    ensemble_error: Optional[float] = Field(None, ge=0, le=1)
    center_error: Optional[float] = Field(None, ge=0, le=1)
    member_errors: List[float] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"pair": f"{i}-{i + 1}", "gap": g, "agreement": a}
            for i, (g, a) in enumerate(zip(self.consecutive_gaps, self.consecutive_agreement))
        ]
        rows.append({"pair": "ens_vs_center", "gap": self.ens_vs_center, "agreement": self.agreement_frac})
        if self.ensemble_error is not None:
            rows.append({"pair": "ensemble_error", "gap": self.ensemble_error, "agreement": None})
            rows.append({"pair": "center_error", "gap": self.center_error, "agreement": None})
        return pd.DataFrame(rows, columns=["pair", "gap", "agreement"])


def _mean_row_norm(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    return float(np.linalg.norm(a - b, axis=1).mean())


def gap_report(snapshots: SnapshotSet, data: Dataset) -> PredictionGap:
    if len(snapshots) < 2:
        raise DomainError("gap report needs at least two snapshots")
    probs = [predict_proba(s, data.inputs) for s in snapshots.member_states]
    f_bar = np.zeros_like(probs[0])
    for p in probs:
        f_bar += p
    f_bar /= len(probs)
    f_center = predict_proba(snapshots.center_state, data.inputs)

    labels = [predict_labels(p) for p in probs]
    ens_labels = predict_labels(f_bar)
    center_labels = predict_labels(f_center)

    report = PredictionGap(
        ens_vs_center=_mean_row_norm(f_bar, f_center),
        consecutive_gaps=[_mean_row_norm(probs[i], probs[i + 1]) for i in range(len(probs) - 1)],
        agreement_frac=float(np.mean(ens_labels == center_labels)),
        consecutive_agreement=[float(np.mean(labels[i] == labels[i + 1])) for i in range(len(labels) - 1)],
        ensemble_error=float(np.mean(ens_labels != data.labels)),
        center_error=float(np.mean(center_labels != data.labels)),
        member_errors=[float(np.mean(lab != data.labels)) for lab in labels],
    )
    logger.info(
        "Gap report | models=%d | ens_vs_center=%.4g | min_consecutive=%.4g | agreement=%.4f",
        len(snapshots), report.ens_vs_center, min(report.consecutive_gaps), report.agreement_frac,
    )
    return report


def random_directions(dim: int, n: int, seed: int) -> List[ParamVector]:
    """`n` mean-centered Gaussian directions scaled so the longest has norm 1."""
    if n < 2:
        raise DomainError("need at least two directions to center them")
    g = np.random.default_rng(seed).standard_normal((n, dim))
    g -= g.mean(axis=0)
    g /= np.linalg.norm(g, axis=1).max()
    return list(g)


def scaling_law_check(
    center: MlpState,
    directions: Sequence[ParamVector],
    eps_list: Sequence[float],
    batch: Batch,
) -> pd.DataFrame:
    """For w_i = center + eps*Delta_i: mean pairwise prediction distance
    (first order in eps) and ||f_bar - f(center)|| (second order in eps)."""
    if len(directions) < 2:
        raise DomainError("need at least two directions")
    dirs = np.stack([np.asarray(d, dtype=np.float64) for d in directions])
    if dirs.shape[1] != center.params.size:
        raise ShapeError(f"directions have {dirs.shape[1]} coordinates, model has {center.params.size}")
    drift = float(np.linalg.norm(dirs.sum(axis=0)))
    if drift > 1e-8:
        raise DomainError(f"directions must sum to zero, |sum| = {drift:.3g}")
    if any(e < 0 for e in eps_list):
        raise DomainError("eps values must be >= 0")

    f_center = predict_proba(center, batch.inputs)
    rows = []
    for eps in eps_list:
        probs = [predict_proba(center.with_params(center.params + eps * d), batch.inputs) for d in dirs]
        pairs = list(itertools.combinations(range(len(probs)), 2))
        first = float(np.mean([_mean_row_norm(probs[i], probs[j]) for i, j in pairs]))
        second = _mean_row_norm(np.mean(np.stack(probs), axis=0), f_center)
        rows.append({"eps": float(eps), "first_order_gap": first, "second_order_gap": second})
    return pd.DataFrame(rows, columns=["eps", "first_order_gap", "second_order_gap"])


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.log(np.asarray(xs, dtype=np.float64))
    y = np.log(np.asarray(ys, dtype=np.float64))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
