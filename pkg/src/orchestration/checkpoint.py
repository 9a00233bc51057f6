"""Binary model checkpoints.

Layout, all integers and reals little-endian:

    b"SWAC" | u32 version | u32 n_layers
    n_layers x (u32 in_dim | u32 out_dim | u8 bn_flag)
    u8 activation (0 relu, 1 tanh) | f64 l2_coeff
    f64 x n_params                      ParamVector, layout order
    per BN layer: f64 running_mean[out_dim] | f64 running_var[out_dim]
    u32 CRC-32 of every preceding byte
"""

from __future__ import annotations

import logging
import os
import struct
import zlib
from pathlib import Path
from typing import List, Tuple

import numpy as np

from src.errors import CheckpointError, ConfigError
from src.model.spec import BnStats, MlpSpec, MlpState

logger = logging.getLogger(__name__)

MAGIC = b"SWAC"
VERSION = 1
ACTIVATION_CODES = {"relu": 0, "tanh": 1}
_F64 = np.dtype("<f8")

_HEAD = struct.Struct("<4sII")
_LAYER = struct.Struct("<IIB")
_TAIL = struct.Struct("<Bd")
_CRC = struct.Struct("<I")


def encode_checkpoint(state: MlpState) -> bytes:
    spec = state.spec
    parts: List[bytes] = [_HEAD.pack(MAGIC, VERSION, spec.n_layers)]
    for k in range(spec.n_layers):
        parts.append(_LAYER.pack(spec.layer_dims[k], spec.layer_dims[k + 1], int(spec.has_bn(k))))
    parts.append(_TAIL.pack(ACTIVATION_CODES[spec.activation], spec.l2_coeff))
    parts.append(np.ascontiguousarray(state.params, dtype=_F64).tobytes())
    for stats in state.bn_stats:
        parts.append(np.ascontiguousarray(stats.running_mean, dtype=_F64).tobytes())
        parts.append(np.ascontiguousarray(stats.running_var, dtype=_F64).tobytes())
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def save_checkpoint(state: MlpState, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    tmp = p.with_name(p.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(state))
    os.replace(tmp, p)
    logger.debug("Checkpoint saved | path=%s | params=%d", p, state.params.size)
    return p


def _read_layers(data: bytes) -> Tuple[List[Tuple[int, int, int]], int]:
    _, _, n_layers = _HEAD.unpack_from(data, 0)
    offset = _HEAD.size
    if len(data) < offset + n_layers * _LAYER.size + _TAIL.size + _CRC.size:
        raise CheckpointError(f"file ends inside the header ({len(data)} bytes, {n_layers} layers)", "truncated")
    layers = []
    for _ in range(n_layers):
        layers.append(_LAYER.unpack_from(data, offset))
        offset += _LAYER.size
    return layers, offset


def decode_checkpoint(data: bytes) -> MlpState:
    if len(data) < 4:
        raise CheckpointError(f"file is {len(data)} bytes, too short for the magic", "truncated")
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", "bad_magic")
    if len(data) < 8:
        raise CheckpointError("file ends before the version field", "truncated")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}, expected {VERSION}", "bad_version")
    if len(data) < _HEAD.size:
        raise CheckpointError("file ends before the layer count", "truncated")

    layers, offset = _read_layers(data)
    n_params = sum(i * o + o + (2 * o if bn else 0) for i, o, bn in layers)
    n_bn = sum(2 * o for _, o, bn in layers if bn)
    expected = offset + _TAIL.size + 8 * (n_params + n_bn) + _CRC.size
    if len(data) < expected:
        raise CheckpointError(f"file is {len(data)} bytes, header promises {expected}", "truncated")
    if len(data) > expected:
        raise CheckpointError(f"{len(data) - expected} trailing bytes after the checksum", "malformed")

    (stored,) = _CRC.unpack_from(data, expected - _CRC.size)
    actual = zlib.crc32(data[: expected - _CRC.size]) & 0xFFFFFFFF
    if stored != actual:
        raise CheckpointError(f"CRC mismatch: stored {stored:#010x}, computed {actual:#010x}", "bad_crc")

    if not layers:
        raise CheckpointError("checkpoint has no layers", "malformed")
    for k in range(1, len(layers)):
        if layers[k][0] != layers[k - 1][1]:
            raise CheckpointError(f"layer {k} input {layers[k][0]} != layer {k - 1} output {layers[k - 1][1]}", "malformed")
    if layers[-1][2]:
        raise CheckpointError("output layer cannot carry batch-norm", "malformed")
    act_code, l2 = _TAIL.unpack_from(data, offset)
    names = {v: k for k, v in ACTIVATION_CODES.items()}
    if act_code not in names:
        raise CheckpointError(f"unknown activation code {act_code}", "malformed")
    offset += _TAIL.size

    try:
        spec = MlpSpec(
            layer_dims=tuple([layers[0][0]] + [o for _, o, _ in layers]),
            activation=names[act_code],
            batchnorm=tuple(bool(bn) for _, _, bn in layers[:-1]),
            l2_coeff=l2,
        )
    except ConfigError as exc:
        raise CheckpointError(f"invalid architecture: {exc}", "malformed") from exc
    params = np.frombuffer(data, dtype=_F64, count=n_params, offset=offset).astype(np.float64)
    offset += 8 * n_params
    stats = []
    for _, o, bn in layers:
        if not bn:
            continue
        mean = np.frombuffer(data, dtype=_F64, count=o, offset=offset).astype(np.float64)
        var = np.frombuffer(data, dtype=_F64, count=o, offset=offset + 8 * o).astype(np.float64)
        offset += 16 * o
        stats.append(BnStats(mean, var))
    return MlpState(spec, params, tuple(stats))


def load_checkpoint(path: str | Path) -> MlpState:
    p = Path(path)
    state = decode_checkpoint(p.read_bytes())
    logger.debug("Checkpoint loaded | path=%s | layers=%s", p, state.spec.layer_dims)
    return state
