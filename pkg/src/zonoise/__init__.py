"""Noise-tolerant zeroth-order optimization: grid searches, restart reductions and noise-tolerance measurement."""

__version__ = "0.1.0"

from .bounds import noise_bound
from .grid import (
    Grid1DConfig,
    SimplexSearchConfig,
    SolveReport,
    grid_search_1d,
    grid_search_separable,
    probe_budget,
    simplex_grid_search,
)
from .harness import MalnQuery, MalnReport, compare_with_theory, measure_maln
from .oracles import (
    AdversarialBatch,
    AdversarialPlanted,
    AdversarialSign,
    NoisyOracle,
    SmoothingOracleConfig,
    UniformBounded,
    Zero,
    mc_sample_count,
    regularized_oracle,
    smoothing_oracle,
)
from .problems import Ball, BarycentricPoint, Box, ClassParams, Interval, ProblemInstance, Simplex, make_instance
from .reductions import (
    BaseSolverConfig,
    RestartSchedule,
    base_solver,
    restart_solve,
    schedule_lipschitz_sg,
    schedule_smooth_sg,
)

__all__ = [
    "AdversarialBatch",
    "AdversarialPlanted",
    "AdversarialSign",
    "Ball",
    "BarycentricPoint",
    "BaseSolverConfig",
    "Box",
    "ClassParams",
    "Grid1DConfig",
    "Interval",
    "MalnQuery",
    "MalnReport",
    "NoisyOracle",
    "ProblemInstance",
    "RestartSchedule",
    "Simplex",
    "SimplexSearchConfig",
    "SmoothingOracleConfig",
    "SolveReport",
    "UniformBounded",
    "Zero",
    "base_solver",
    "compare_with_theory",
    "grid_search_1d",
    "grid_search_separable",
    "make_instance",
    "mc_sample_count",
    "measure_maln",
    "probe_budget",
    "regularized_oracle",
    "restart_solve",
    "schedule_lipschitz_sg",
    "schedule_smooth_sg",
    "simplex_grid_search",
    "smoothing_oracle",
    "noise_bound",
]
