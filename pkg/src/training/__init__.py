from src.training.sgd import apply_momentum_, sgd_step
from src.training.swa import SwaState, fold_, swa_update
from src.training.trainer import (
    BufferPool,
    Snapshot,
    SwaRun,
    TrainerConfig,
    TrajectoryLog,
    pretrain,
    run_swa,
)

__all__ = [
    "BufferPool",
    "Snapshot",
    "SwaRun",
    "SwaState",
    "TrainerConfig",
    "TrajectoryLog",
    "apply_momentum_",
    "fold_",
    "pretrain",
    "run_swa",
    "sgd_step",
    "swa_update",
]
