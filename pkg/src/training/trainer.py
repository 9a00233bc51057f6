from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.errors import ConfigError, DomainError, NumericError
from src.model.batch import Dataset
from src.model.network import batch_loss, evaluate, loss_and_grad, recompute_bn_stats
from src.model.spec import MlpSpec, MlpState, ParamVector, init_state
from src.schedules.lr import (
    LrSchedule,
    PiecewiseDecay,
    default_capture_every,
    is_capture_point,
    iters_per_epoch,
    lr_at,
)

from .sgd import apply_momentum_
from .swa import SwaState, fold_

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["iter", "epoch", "lr", "train_loss", "test_err", "swa_test_err"]


@dataclass(frozen=True)
class TrainerConfig:
    schedule: LrSchedule
    iters: int
    momentum: float = 0.9
    batch_size: int = 50
    capture_every: Optional[int] = None
    seed: int = 0
    swa_enabled: bool = True
    log_snapshots: bool = False
    include_init: bool = True
    swa_start: int = 0
    eval_every: int = 0
    bn_batch_size: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}", key="trainer.momentum")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}", key="trainer.batch_size")
        if self.iters < 0:
            raise ConfigError(f"iters must be >= 0, got {self.iters}", key="trainer.iters")
        if self.capture_every is not None and self.capture_every < 1:
            raise ConfigError(f"capture_every must be >= 1, got {self.capture_every}", key="trainer.capture_every")
        if self.swa_start < 0:
            raise ConfigError(f"swa_start must be >= 0, got {self.swa_start}", key="trainer.swa_start")
        if self.eval_every < 0:
            raise ConfigError(f"eval_every must be >= 0, got {self.eval_every}", key="trainer.eval_every")

    def fingerprint(self) -> str:
        return hashlib.sha256(repr(self).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Snapshot:
    iteration: int
    params: ParamVector
    train_loss: float
    kind: str = "capture"


@dataclass
class TrajectoryLog:
    """Snapshots in capture order. The starting point (kind="init") has the
    full-split train loss; captures carry the loss of the capturing minibatch."""

    snapshots: List[Snapshot] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def append(self, snap: Snapshot) -> None:
        if self.snapshots and snap.iteration <= self.snapshots[-1].iteration:
            raise DomainError(
                f"snapshot iterations must increase: {snap.iteration} after {self.snapshots[-1].iteration}"
            )
        self.snapshots.append(snap)

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def iterations(self) -> List[int]:
        return [s.iteration for s in self.snapshots]

    def captures(self) -> List[Snapshot]:
        return [s for s in self.snapshots if s.kind == "capture"]

    def mean_params(self) -> ParamVector:
        return np.mean(np.stack([s.params for s in self.snapshots]), axis=0)


class BufferPool:
    """Hands out the trainer's persistent ParamVector-sized buffers and counts them."""

    def __init__(self) -> None:
        self.allocations = 0
        self.names: List[str] = []

    def take(self, name: str, like: ParamVector) -> ParamVector:
        self.allocations += 1
        self.names.append(name)
        return np.array(like, dtype=np.float64, copy=True)


@dataclass(frozen=True)
class SwaRun:
    swa_model: MlpState
    final_sgd_model: MlpState
    log: TrajectoryLog
    curve: pd.DataFrame
    swa_state: Optional[SwaState] = None

    def __iter__(self) -> Iterator[Any]:
        return iter((self.swa_model, self.final_sgd_model, self.log))


def _with_fresh_bn(spec: MlpSpec, params: ParamVector, bn_stats, data: Dataset, bn_batch_size: Optional[int]) -> MlpState:
    return recompute_bn_stats(MlpState(spec, params, bn_stats), data.batches(bn_batch_size))


def run_swa(
    init: MlpState,
    data: Dataset,
    cfg: TrainerConfig,
    *,
    test: Optional[Dataset] = None,
    pool: Optional[BufferPool] = None,
    progress: bool = False,
) -> SwaRun:
    """SGD with momentum from `init`, folding the weights into a running
    average at every capture point after `cfg.swa_start`."""
    spec = init.spec
    n = len(data)
    if cfg.batch_size > n:
        raise ConfigError(f"batch_size {cfg.batch_size} exceeds dataset size {n}", key="trainer.batch_size")
    ipe = iters_per_epoch(n, cfg.batch_size)
    capture_every = cfg.capture_every or default_capture_every(cfg.schedule, ipe)
    if cfg.swa_enabled:
        if cfg.iters // capture_every - cfg.swa_start // capture_every < 1:
            raise ConfigError(
                f"no capture point in ({cfg.swa_start}, {cfg.iters}] with capture_every={capture_every}",
                key="trainer.iters",
            )

    pool = pool or BufferPool()
    w = pool.take("weights", init.params)
    v = pool.take("velocity", np.zeros_like(init.params))
    avg = pool.take("average", init.params) if cfg.swa_enabled else None
    bn_stats = init.bn_stats

    log = TrajectoryLog(metadata={"config_hash": cfg.fingerprint(), "seed": cfg.seed})
    count = 0
    n_models = 0

    def start_average(iteration: int) -> int:
        avg[:] = w
        if not cfg.include_init:
            return 0
        if cfg.log_snapshots:
            full = batch_loss(MlpState(spec, w, bn_stats), data.as_batch(), "train")
            log.append(Snapshot(iteration, w.copy(), full, kind="init"))
        return 1

    if cfg.swa_enabled and cfg.swa_start == 0:
        count = start_average(0)

    logger.info(
        "SWA run started | iters=%d | iters_per_epoch=%d | capture_every=%d | swa=%s | swa_start=%d",
        cfg.iters, ipe, capture_every, cfg.swa_enabled, cfg.swa_start,
    )

    rng = np.random.default_rng(cfg.seed)
    rows: List[Dict[str, Any]] = []
    perm = np.arange(n)
    for i in tqdm(range(1, cfg.iters + 1), disable=not progress, desc="train", leave=False):
        pos = (i - 1) % ipe
        if pos == 0:
            perm = rng.permutation(n)
        batch = data.take(perm[pos * cfg.batch_size:(pos + 1) * cfg.batch_size])
        alpha = lr_at(cfg.schedule, i, ipe)

        loss, grad = loss_and_grad(MlpState(spec, w, bn_stats), batch)
        if not (np.isfinite(loss) and np.isfinite(grad).all()):
            raise NumericError(f"non-finite loss or gradient at iteration {i}")
        apply_momentum_(w, v, grad, alpha, cfg.momentum)

        if cfg.swa_enabled:
            if i == cfg.swa_start:
                count = start_average(i)
            elif i > cfg.swa_start and is_capture_point(cfg.schedule, i, capture_every):
                fold_(avg, w, count)
                count += 1
                n_models += 1
                if cfg.log_snapshots:
                    log.append(Snapshot(i, w.copy(), loss))
                logger.debug("SWA capture | iter=%d | n_models=%d | lr=%.6g", i, n_models, alpha)

        if cfg.eval_every and test is not None and i % cfg.eval_every == 0:
            sgd_eval = evaluate(_with_fresh_bn(spec, w.copy(), bn_stats, data, cfg.bn_batch_size), test)
            swa_err: Optional[float] = None
            if cfg.swa_enabled and n_models > 0:
                swa_err = evaluate(_with_fresh_bn(spec, avg.copy(), bn_stats, data, cfg.bn_batch_size), test).error
            rows.append(
                {
                    "iter": i,
                    "epoch": i / ipe,
                    "lr": alpha,
                    "train_loss": loss,
                    "test_err": sgd_eval.error,
                    "swa_test_err": swa_err,
                }
            )

    final_sgd = _with_fresh_bn(spec, w.copy(), bn_stats, data, cfg.bn_batch_size)
    swa_state: Optional[SwaState] = None
    if cfg.swa_enabled:
        swa_model = _with_fresh_bn(spec, avg.copy(), bn_stats, data, cfg.bn_batch_size)
        swa_state = SwaState(swa_model.params, n_models, capture_every, cfg.include_init)
    else:
        swa_model = final_sgd

    logger.info("SWA run finished | iters=%d | n_models=%d | snapshots=%d", cfg.iters, n_models, len(log))
    return SwaRun(
        swa_model=swa_model,
        final_sgd_model=final_sgd,
        log=log,
        curve=pd.DataFrame(rows, columns=CURVE_COLUMNS),
        swa_state=swa_state,
    )


def pretrain(
    spec: MlpSpec,
    data: Dataset,
    cfg: TrainerConfig,
    *,
    init: Optional[MlpState] = None,
    test: Optional[Dataset] = None,
    progress: bool = False,
) -> MlpState:
    """Conventional SGD training, typically with the PiecewiseDecay schedule."""
    start = init if init is not None else init_state(spec, cfg.seed)
    if cfg.iters == 0:
        return start
    if not isinstance(cfg.schedule, PiecewiseDecay):
        logger.warning("Pretraining without the piecewise decay schedule | schedule=%s", type(cfg.schedule).__name__)
    run = run_swa(start, data, replace(cfg, swa_enabled=False, log_snapshots=False), test=test, progress=progress)
    return run.final_sgd_model
