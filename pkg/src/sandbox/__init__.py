from src.sandbox.quadratic import (
    QuadraticProblem,
    StationaryStats,
    averaging_convergence,
    ellipsoid_check,
    inner_mass_fraction,
    simulate_sgd,
    stationary_stats,
)

__all__ = [
    "QuadraticProblem",
    "StationaryStats",
    "averaging_convergence",
    "ellipsoid_check",
    "inner_mass_fraction",
    "simulate_sgd",
    "stationary_stats",
]
