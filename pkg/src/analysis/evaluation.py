from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from src.errors import NumericError
from src.model.batch import SplitData
from src.model.network import evaluate, recompute_bn_stats
from src.model.spec import MlpSpec, MlpState, ParamVector, default_bn_stats

logger = logging.getLogger(__name__)

SATURATION_CAP = 1e4


@dataclass(frozen=True)
class PointMetrics:
    train_loss: float
    test_error: float
    saturated: bool = False


class PointEvaluator(Protocol):
    n_evaluations: int

    def __call__(self, params: ParamVector) -> PointMetrics: ...


class ModelEvaluator:
    """Train loss (with the L2 term) and test error of a weight vector.

    BN stats are recomputed on the training split at every point, since a
    probed vector never saw training.
    """

    def __init__(
        self,
        spec: MlpSpec,
        data: SplitData,
        *,
        cap: float = SATURATION_CAP,
        bn_batch_size: Optional[int] = None,
    ) -> None:
        self.spec = spec
        self.data = data
        self.cap = cap
        self.bn_batch_size = bn_batch_size
        self.n_evaluations = 0

    def state_at(self, params: ParamVector) -> MlpState:
        state = MlpState(self.spec, np.asarray(params, dtype=np.float64), default_bn_stats(self.spec))
        return recompute_bn_stats(state, self.data.train.batches(self.bn_batch_size))

    def __call__(self, params: ParamVector) -> PointMetrics:
        self.n_evaluations += 1
        try:
            state = self.state_at(params)
            train = evaluate(state, self.data.train)
            test = evaluate(state, self.data.test)
        except NumericError as exc:
            logger.warning("Saturated landscape point | reason=%s", exc)
            return PointMetrics(self.cap, 1.0, saturated=True)
        if not np.isfinite(train.loss) or train.loss > self.cap:
            return PointMetrics(self.cap, test.error, saturated=True)
        return PointMetrics(train.loss, test.error)
