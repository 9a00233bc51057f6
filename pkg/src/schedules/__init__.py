from src.schedules.lr import (
    Constant,
    CosineSegment,
    CyclicLinear,
    LrSchedule,
    PiecewiseDecay,
    default_capture_every,
    is_capture_point,
    iters_per_epoch,
    lr_at,
    schedule_from_dict,
    schedule_to_dict,
)

__all__ = [
    "Constant",
    "CosineSegment",
    "CyclicLinear",
    "LrSchedule",
    "PiecewiseDecay",
    "default_capture_every",
    "is_capture_point",
    "iters_per_epoch",
    "lr_at",
    "schedule_from_dict",
    "schedule_to_dict",
]
