from src.analysis.ensemble import (
    PredictionGap,
    SnapshotSet,
    ensemble_predict,
    gap_report,
    loglog_slope,
    random_directions,
    scaling_law_check,
)
from src.analysis.evaluation import ModelEvaluator, PointEvaluator, PointMetrics
from src.analysis.landscape import (
    GridSurface,
    PlaneBasis,
    RayProfile,
    WidthEstimate,
    default_grid,
    evaluate_grid,
    plane_from_points,
    project_trajectory,
    ray_offsets,
    ray_profile,
    segment_minimizers,
    segment_profile,
    width_metric,
)

__all__ = [
    "GridSurface",
    "ModelEvaluator",
    "PlaneBasis",
    "PointEvaluator",
    "PointMetrics",
    "PredictionGap",
    "RayProfile",
    "SnapshotSet",
    "WidthEstimate",
    "default_grid",
    "ensemble_predict",
    "evaluate_grid",
    "gap_report",
    "loglog_slope",
    "plane_from_points",
    "project_trajectory",
    "random_directions",
    "ray_offsets",
    "ray_profile",
    "scaling_law_check",
    "segment_minimizers",
    "segment_profile",
    "width_metric",
]
