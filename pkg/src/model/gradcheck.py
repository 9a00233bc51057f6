from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from src.errors import DomainError

from .batch import Batch
from .network import batch_loss, loss_and_grad
from .spec import MlpSpec, MlpState, ParamVector, init_state


def central_difference(fn: Callable[[ParamVector], float], w: ParamVector, h: float) -> ParamVector:
    """(fn(w + h e_j) - fn(w - h e_j)) / 2h for every coordinate j."""
    if not h > 0:
        raise DomainError(f"finite-difference step must be > 0, got {h}")
    w = np.asarray(w, dtype=np.float64)
    out = np.empty_like(w)
    shifted = w.copy()
    for j in range(w.size):
        shifted[j] = w[j] + h
        up = fn(shifted)
        shifted[j] = w[j] - h
        down = fn(shifted)
        shifted[j] = w[j]
        out[j] = (up - down) / (2.0 * h)
    return out


def finite_diff_grad(state: MlpState, batch: Batch, h: float = 1e-5) -> ParamVector:
    # each perturbed evaluation recomputes its own BN batch statistics
    return central_difference(lambda w: batch_loss(state.with_params(w), batch, "train"), state.params, h)


def max_relative_error(analytic: ParamVector, numeric: ParamVector) -> float:
    return float(np.max(np.abs(analytic - numeric) / (1.0 + np.abs(numeric))))


# Architectures the gradient check runs on by default.
ARCHITECTURES: Tuple[MlpSpec, ...] = (
    MlpSpec((2, 4, 2), activation="tanh", batchnorm=False, l2_coeff=0.0),
    MlpSpec((2, 4, 2), activation="relu", batchnorm=False, l2_coeff=0.01),
    MlpSpec((2, 4, 2), activation="tanh", batchnorm=True, l2_coeff=0.01),
    MlpSpec((2, 4, 2), activation="relu", batchnorm=True, l2_coeff=0.0),
    MlpSpec((3, 5, 4, 3), activation="tanh", batchnorm=(True, False), l2_coeff=0.05),
    MlpSpec((3, 5, 4, 3), activation="relu", batchnorm=(False, True), l2_coeff=0.05),
)


@dataclass(frozen=True)
class GradCheckResult:
    spec: MlpSpec
    n_params: int
    max_rel_error: float
    passed: bool


def gradient_check(
    spec: MlpSpec,
    *,
    seed: int = 0,
    n_samples: int = 8,
    h: float = 1e-5,
    tol: float = 1e-6,
) -> GradCheckResult:
    rng = np.random.default_rng(seed)
    state = init_state(spec, seed)
    # move BN scale/shift and biases off their initial values so every term is exercised
    state = state.with_params(state.params + 0.1 * rng.standard_normal(state.params.shape))
    batch = Batch(
        rng.standard_normal((n_samples, spec.input_dim)),
        rng.integers(0, spec.output_dim, size=n_samples),
    )
    _, analytic = loss_and_grad(state, batch)
    numeric = finite_diff_grad(state, batch, h)
    err = max_relative_error(analytic, numeric)
    return GradCheckResult(spec=spec, n_params=spec.n_params, max_rel_error=err, passed=err < tol)


def check_all(seed: int = 0) -> List[GradCheckResult]:
    return [gradient_check(spec, seed=seed) for spec in ARCHITECTURES]
