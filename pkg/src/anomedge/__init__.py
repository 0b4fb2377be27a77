"""Anomalous edge detection on attributed graphs via low-rank + sparse Laplacian splits."""

from .als import AlsParams, AlsResult, SolverDivergedError, solve_als
from .datagen import SbmConfig, Scenario, build_attributed_scenario, build_sbm_scenario
from .evaluation import (
    RankedCandidates,
    extract_candidates,
    hit_at_10,
    mrr,
    run_trials,
    sweep,
    topology_error,
)
from .graph import EdgeSet, FeatureMatrix, GraphData, GraphValidationError, laplacian_from_adjacency
from .recovery import RecoveryParams, RecoveryResult, solve_graphical_lasso, solve_recovery

__version__ = "0.1.0"
