from src.model.batch import Batch, Dataset, SplitData
from src.model.gradcheck import central_difference, finite_diff_grad, gradient_check
from src.model.network import (
    Metrics,
    evaluate,
    forward,
    loss_and_grad,
    predict_proba,
    recompute_bn_stats,
)
from src.model.spec import EPS_BN, BnStats, MlpSpec, MlpState, ParamVector, init_state

__all__ = [
    "Batch",
    "BnStats",
    "Dataset",
    "EPS_BN",
    "Metrics",
    "MlpSpec",
    "MlpState",
    "ParamVector",
    "SplitData",
    "central_difference",
    "evaluate",
    "finite_diff_grad",
    "forward",
    "gradient_check",
    "init_state",
    "loss_and_grad",
    "predict_proba",
    "recompute_bn_stats",
]
