from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Literal, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from src.errors import DomainError, NumericError, ShapeError

from .batch import Batch, Dataset
from .spec import EPS_BN, BnStats, MlpSpec, MlpState, ParamVector, penalty_mask, unflatten

logger = logging.getLogger(__name__)

Mode = Literal["train", "eval"]


@dataclass
class _LayerRecord:
    inputs: NDArray[np.float64]
    z: NDArray[np.float64]
    y: NDArray[np.float64]
    a: Optional[NDArray[np.float64]] = None
    xhat: Optional[NDArray[np.float64]] = None
    inv_std: Optional[NDArray[np.float64]] = None


@dataclass
class ForwardCache:
    mode: Mode
    layers: List[_LayerRecord]


@dataclass(frozen=True)
class Metrics:
    loss: float
    error: float

    @property
    def accuracy(self) -> float:
        return 1.0 - self.error


def _activate(spec: MlpSpec, y: NDArray[np.float64]) -> NDArray[np.float64]:
    if spec.activation == "relu":
        return np.maximum(y, 0.0)
    return np.tanh(y)


def _activation_grad(spec: MlpSpec, rec: _LayerRecord) -> NDArray[np.float64]:
    if spec.activation == "relu":
        return (rec.y > 0.0).astype(np.float64)
    return 1.0 - rec.a * rec.a


def _forward(state: MlpState, inputs: NDArray[np.float64], mode: Mode) -> Tuple[NDArray[np.float64], ForwardCache]:
    spec = state.spec
    if mode not in ("train", "eval"):
        raise DomainError(f"unknown mode {mode!r}")
    if inputs.ndim != 2 or inputs.shape[1] != spec.input_dim:
        raise ShapeError(f"input shape {inputs.shape} does not match input_dim={spec.input_dim}")

    layers = unflatten(spec, state.params)
    records: List[_LayerRecord] = []
    h = inputs
    last = spec.n_layers - 1
    for i, lp in enumerate(layers):
        z = h @ lp.weight + lp.bias
        if i == last:
            records.append(_LayerRecord(inputs=h, z=z, y=z))
            if not np.isfinite(z).all():
                raise NumericError("non-finite logits", layer=i)
            return z, ForwardCache(mode, records)

        rec = _LayerRecord(inputs=h, z=z, y=z)
        if spec.has_bn(i):
            if mode == "train":
                mu = z.mean(axis=0)
                var = z.var(axis=0)
            else:
                stats = state.bn_for(i)
                mu, var = stats.running_mean, stats.running_var
            rec.inv_std = 1.0 / np.sqrt(var + EPS_BN)
            rec.xhat = (z - mu) * rec.inv_std
            rec.y = lp.gamma * rec.xhat + lp.beta
        rec.a = _activate(spec, rec.y)
        if not np.isfinite(rec.a).all():
            raise NumericError("non-finite activation", layer=i)
        records.append(rec)
        h = rec.a
    raise AssertionError("unreachable: network has no output layer")


def forward(state: MlpState, batch: Batch, mode: Mode = "eval") -> Tuple[NDArray[np.float64], ForwardCache]:
    return _forward(state, batch.inputs, mode)


def log_softmax(logits: NDArray[np.float64]) -> NDArray[np.float64]:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.exp(log_softmax(logits))


def l2_penalty(spec: MlpSpec, params: ParamVector) -> float:
    if spec.l2_coeff == 0.0:
        return 0.0
    w = params * penalty_mask(spec)
    return 0.5 * spec.l2_coeff * float(w @ w)


def _check_labels(spec: MlpSpec, labels: NDArray[np.int64]) -> None:
    if labels.size and (labels.min() < 0 or labels.max() >= spec.output_dim):
        raise DomainError(f"labels must lie in [0, {spec.output_dim})")


def _backward(state: MlpState, cache: ForwardCache, dlogits: NDArray[np.float64]) -> ParamVector:
    spec = state.spec
    grad = np.zeros_like(state.params)
    layers = unflatten(spec, state.params)
    grads = unflatten(spec, grad)
    last = spec.n_layers - 1

    delta = dlogits
    for i in range(last, -1, -1):
        rec, lp, g = cache.layers[i], layers[i], grads[i]
        if i == last:
            dz = delta
        else:
            dy = delta * _activation_grad(spec, rec)
            if spec.has_bn(i):
                g.gamma[:] = (dy * rec.xhat).sum(axis=0)
                g.beta[:] = dy.sum(axis=0)
                dxhat = dy * lp.gamma
                if cache.mode == "train":
                    n = dxhat.shape[0]
                    dz = (rec.inv_std / n) * (
                        n * dxhat - dxhat.sum(axis=0) - rec.xhat * (dxhat * rec.xhat).sum(axis=0)
                    )
                else:
                    dz = dxhat * rec.inv_std
            else:
                dz = dy
        g.weight[:] = rec.inputs.T @ dz
        g.bias[:] = dz.sum(axis=0)
        if i > 0:
            delta = dz @ lp.weight.T
    return grad


def loss_and_grad(state: MlpState, batch: Batch) -> Tuple[float, ParamVector]:
    """L2-regularized mean cross-entropy and its gradient, BN in train mode."""
    spec = state.spec
    _check_labels(spec, batch.labels)
    logits, cache = _forward(state, batch.inputs, "train")
    n = logits.shape[0]
    logp = log_softmax(logits)
    rows = np.arange(n)
    loss = -float(logp[rows, batch.labels].mean()) + l2_penalty(spec, state.params)

    dlogits = np.exp(logp)
    dlogits[rows, batch.labels] -= 1.0
    dlogits /= n
    grad = _backward(state, cache, dlogits)
    if spec.l2_coeff:
        grad += spec.l2_coeff * penalty_mask(spec) * state.params
    return loss, grad


def batch_loss(state: MlpState, batch: Batch, mode: Mode = "train") -> float:
    _check_labels(state.spec, batch.labels)
    logits, _ = _forward(state, batch.inputs, mode)
    logp = log_softmax(logits)
    return -float(logp[np.arange(len(batch)), batch.labels].mean()) + l2_penalty(state.spec, state.params)


def predict_proba(state: MlpState, inputs: NDArray[np.float64]) -> NDArray[np.float64]:
    logits, _ = _forward(state, np.asarray(inputs, dtype=np.float64), "eval")
    return softmax(logits)


def predict_labels(probs: NDArray[np.float64]) -> NDArray[np.int64]:
    # argmax breaks ties toward the lower class index
    return np.argmax(probs, axis=1)


def evaluate(state: MlpState, data: Dataset) -> Metrics:
    """Eval-mode L2-regularized loss and error rate over the whole split."""
    _check_labels(state.spec, data.labels)
    logits, _ = _forward(state, data.inputs, "eval")
    logp = log_softmax(logits)
    loss = -float(logp[np.arange(len(data)), data.labels].mean()) + l2_penalty(state.spec, state.params)
    error = float(np.mean(np.argmax(logits, axis=1) != data.labels))
    return Metrics(loss=loss, error=error)


def _merge_moments(
    acc: Tuple[int, NDArray[np.float64], NDArray[np.float64]],
    z: NDArray[np.float64],
) -> Tuple[int, NDArray[np.float64], NDArray[np.float64]]:
    n_a, mean_a, m2_a = acc
    n_b = z.shape[0]
    mean_b = z.mean(axis=0)
    m2_b = ((z - mean_b) ** 2).sum(axis=0)
    n = n_a + n_b
    delta = mean_b - mean_a
    mean = mean_a + delta * (n_b / n)
    m2 = m2_a + m2_b + delta * delta * (n_a * n_b / n)
    return n, mean, m2


def recompute_bn_stats(state: MlpState, data: Iterable[Batch]) -> MlpState:
    """One pass over `data` setting every BN layer's running stats to the exact
    pooled mean and biased variance of its pre-normalization activations."""
    spec = state.spec
    acc: Dict[int, Tuple[int, NDArray[np.float64], NDArray[np.float64]]] = {
        i: (0, np.zeros(spec.layer_dims[i + 1]), np.zeros(spec.layer_dims[i + 1])) for i in spec.bn_layers
    }
    n_batches = 0
    for batch in data:
        n_batches += 1
        if not spec.bn_layers:
            continue
        _, cache = _forward(state, batch.inputs, "train")
        for i in spec.bn_layers:
            acc[i] = _merge_moments(acc[i], cache.layers[i].z)
    if n_batches == 0:
        raise DomainError("BN statistics pass needs at least one batch")
    if not spec.bn_layers:
        return state

    stats: List[BnStats] = []
    clamped = 0
    for i in spec.bn_layers:
        count, mean, m2 = acc[i]
        var = m2 / count
        low = var < EPS_BN
        clamped += int(low.sum())
        stats.append(BnStats(running_mean=mean, running_var=np.where(low, EPS_BN, var)))
    if clamped:
        logger.warning("BN variance clamped | features=%d | eps=%g", clamped, EPS_BN)
    return state.with_bn_stats(stats)
