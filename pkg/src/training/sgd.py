from __future__ import annotations

from typing import Tuple

import numpy as np

from src.errors import DomainError, NumericError
from src.model.batch import Batch
from src.model.network import loss_and_grad
from src.model.spec import MlpState, ParamVector


def apply_momentum_(w: ParamVector, v: ParamVector, grad: ParamVector, alpha: float, momentum: float) -> None:
    """In place: v <- momentum*v + grad; w <- w - alpha*v."""
    v *= momentum
    v += grad
    w -= alpha * v


def sgd_step(
    state: MlpState,
    velocity: ParamVector,
    batch: Batch,
    alpha: float,
    momentum: float,
) -> Tuple[MlpState, ParamVector]:
    """One heavy-ball SGD step; with momentum=0 this is plain SGD. Inputs are not modified."""
    if not alpha > 0:
        raise DomainError(f"learning rate must be > 0, got {alpha}")
    _, grad = loss_and_grad(state, batch)
    if not np.isfinite(grad).all():
        raise NumericError("non-finite gradient; step aborted")
    w = state.params.copy()
    v = np.array(velocity, dtype=np.float64, copy=True)
    apply_momentum_(w, v, grad, alpha, momentum)
    return state.with_params(w), v
