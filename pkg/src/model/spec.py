from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from src.errors import ConfigError, NumericError, ShapeError

# Flat float64 vector of every trainable weight, in `param_layout` order.
ParamVector = NDArray[np.float64]

Activation = Literal["relu", "tanh"]

EPS_BN = 1e-5


@dataclass(frozen=True)
class MlpSpec:
    """Dense feed-forward architecture.

    `batchnorm` has one flag per hidden layer; a single bool is broadcast.
    """

    layer_dims: Tuple[int, ...]
    activation: Activation = "relu"
    batchnorm: Union[bool, Tuple[bool, ...]] = False
    l2_coeff: float = 0.0

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2:
            raise ConfigError("layer_dims needs an input and an output size", key="model.layer_dims")
        if any(d < 1 for d in dims):
            raise ConfigError(f"layer_dims entries must be >= 1, got {list(dims)}", key="model.layer_dims")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"unknown activation {self.activation!r}", key="model.activation")
        if not self.l2_coeff >= 0:
            raise ConfigError(f"l2_coeff must be >= 0, got {self.l2_coeff}", key="model.l2_coeff")

        n_hidden = len(dims) - 2
        if isinstance(self.batchnorm, (bool, np.bool_)):
            flags = (bool(self.batchnorm),) * n_hidden
        else:
            flags = tuple(bool(b) for b in self.batchnorm)
            if len(flags) != n_hidden:
                raise ConfigError(
                    f"batchnorm needs one flag per hidden layer ({n_hidden}), got {len(flags)}",
                    key="model.batchnorm",
                )
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "batchnorm", flags)
        object.__setattr__(self, "l2_coeff", float(self.l2_coeff))

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def has_bn(self, layer: int) -> bool:
        return layer < self.n_layers - 1 and self.batchnorm[layer]

    @property
    def bn_layers(self) -> Tuple[int, ...]:
        return tuple(i for i in range(self.n_layers) if self.has_bn(i))

    @property
    def n_params(self) -> int:
        return sum(s.size for s in param_layout(self))


@dataclass(frozen=True)
class LayerSlices:
    layer: int
    in_dim: int
    out_dim: int
    weight: slice
    bias: slice
    gamma: Optional[slice] = None
    beta: Optional[slice] = None

    @property
    def size(self) -> int:
        end = self.beta.stop if self.beta is not None else self.bias.stop
        return end - self.weight.start


def param_layout(spec: MlpSpec) -> List[LayerSlices]:
    """Offsets of W (row-major), b, then gamma, beta for every layer."""
    out: List[LayerSlices] = []
    pos = 0
    for i in range(spec.n_layers):
        d_in, d_out = spec.layer_dims[i], spec.layer_dims[i + 1]
        w = slice(pos, pos + d_in * d_out)
        pos = w.stop
        b = slice(pos, pos + d_out)
        pos = b.stop
        gamma = beta = None
        if spec.has_bn(i):
            gamma = slice(pos, pos + d_out)
            pos = gamma.stop
            beta = slice(pos, pos + d_out)
            pos = beta.stop
        out.append(LayerSlices(i, d_in, d_out, w, b, gamma, beta))
    return out


@dataclass(frozen=True)
class LayerParams:
    weight: NDArray[np.float64]
    bias: NDArray[np.float64]
    gamma: Optional[NDArray[np.float64]] = None
    beta: Optional[NDArray[np.float64]] = None


def unflatten(spec: MlpSpec, params: ParamVector) -> List[LayerParams]:
    """Views into `params`; writing to them writes to the vector."""
    params = check_params(spec, params)
    layers: List[LayerParams] = []
    for s in param_layout(spec):
        layers.append(
            LayerParams(
                weight=params[s.weight].reshape(s.in_dim, s.out_dim),
                bias=params[s.bias],
                gamma=params[s.gamma] if s.gamma is not None else None,
                beta=params[s.beta] if s.beta is not None else None,
            )
        )
    return layers


def flatten(layers: Sequence[LayerParams]) -> ParamVector:
    parts: List[NDArray[np.float64]] = []
    for lp in layers:
        parts.append(np.asarray(lp.weight, dtype=np.float64).ravel())
        parts.append(np.asarray(lp.bias, dtype=np.float64).ravel())
        if lp.gamma is not None:
            parts.append(np.asarray(lp.gamma, dtype=np.float64).ravel())
            parts.append(np.asarray(lp.beta, dtype=np.float64).ravel())
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.float64)


def penalty_mask(spec: MlpSpec) -> NDArray[np.float64]:
    """1.0 on weight-matrix entries, 0.0 on biases and BN scale/shift."""
    mask = np.zeros(spec.n_params, dtype=np.float64)
    for s in param_layout(spec):
        mask[s.weight] = 1.0
    return mask


def check_params(spec: MlpSpec, params: ParamVector) -> ParamVector:
    params = np.asarray(params)
    if params.ndim != 1 or params.shape[0] != spec.n_params:
        raise ShapeError(f"parameter vector has shape {params.shape}, spec needs ({spec.n_params},)")
    if params.dtype != np.float64:
        raise ShapeError(f"parameter vector must be float64, got {params.dtype}")
    if not np.isfinite(params).all():
        raise NumericError(f"parameter vector has {int((~np.isfinite(params)).sum())} non-finite entries")
    return params


@dataclass(frozen=True)
class BnStats:
    running_mean: NDArray[np.float64]
    running_var: NDArray[np.float64]


@dataclass(frozen=True)
class MlpState:
    """Parameters plus BN running statistics (one `BnStats` per BN layer, in layer order)."""

    spec: MlpSpec
    params: ParamVector
    bn_stats: Tuple[BnStats, ...] = field(default=())

    def __post_init__(self) -> None:
        check_params(self.spec, self.params)
        if len(self.bn_stats) != len(self.spec.bn_layers):
            raise ShapeError(
                f"expected {len(self.spec.bn_layers)} BN stat blocks, got {len(self.bn_stats)}"
            )

    def bn_for(self, layer: int) -> BnStats:
        return self.bn_stats[self.spec.bn_layers.index(layer)]

    def with_params(self, params: ParamVector) -> "MlpState":
        return MlpState(self.spec, params, self.bn_stats)

    def with_bn_stats(self, bn_stats: Sequence[BnStats]) -> "MlpState":
        return MlpState(self.spec, self.params, tuple(bn_stats))


def default_bn_stats(spec: MlpSpec) -> Tuple[BnStats, ...]:
    return tuple(
        BnStats(np.zeros(spec.layer_dims[i + 1]), np.ones(spec.layer_dims[i + 1]))
        for i in spec.bn_layers
    )


def init_state(spec: MlpSpec, seed: int) -> MlpState:
    """Glorot-uniform weights, zero biases, unit BN scale, zero BN shift."""
    rng = np.random.default_rng(seed)
    layers: List[LayerParams] = []
    for s in param_layout(spec):
        limit = np.sqrt(6.0 / (s.in_dim + s.out_dim))
        layers.append(
            LayerParams(
                weight=rng.uniform(-limit, limit, size=(s.in_dim, s.out_dim)),
                bias=np.zeros(s.out_dim),
                gamma=np.ones(s.out_dim) if s.gamma is not None else None,
                beta=np.zeros(s.out_dim) if s.beta is not None else None,
            )
        )
    return MlpState(spec, flatten(layers), default_bn_stats(spec))
