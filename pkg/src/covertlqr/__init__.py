"""Feedback synthesis that trades LQR performance for adversarial unobservability.

Quick start::

    import numpy as np
    from covertlqr import LinearSystem, DesignWeights, solve_problem1, ccp_run

    plant = LinearSystem(A=[[0, 1], [0, 0]], B=[[1], [1]], C=[[1, 0]])
    weights = DesignWeights(Q=0.2 * np.eye(2), R=[[1.0]], V=np.eye(2),
                            lam=0.1, epsilon=1e-4, delta=1e-3)
    average = solve_problem1(plant, weights)      # minimizes tr(W V)
    worst = ccp_run(plant, weights)               # maximizes tr(W_eps^-1 V^-1)
"""

from .bounds import (StarMatrices, SubsetCheckReport, TradeoffReport, f_lambda,
                     j1_lower_bound, j2_lower_bound_global, j2_lower_bound_local,
                     star_matrices, subset_monotonicity_check, tradeoff_reports)
from .design_trace import (Problem1Variables, build_problem1_sdp,
                           recover_and_audit, solve_problem1)
from .design_traceinv import (CcpIterate, CcpResult, build_ccp_subproblem,
                              ccp_initialize, ccp_run, dc_constraint_values,
                              history_to_csv, linearize_quadratic)
from .exceptions import (ConfigurationError, CovertLqrError, InfeasibleError,
                         PlacementError, RecoveryError, SimulationError,
                         SolverError, UnstableMatrixError)
from .gramians import (GramianReport, certify_design, eigen_report,
                       gramian_quadrature, metric_j_o1, metric_j_o2,
                       observability_gramian, performance_cost)
from .model import (ControllerDesign, DesignWeights, LinearSystem,
                    ValidationReport, check_controllability,
                    check_observability, validate)
from .sim import (NoiseModel, SimTrace, build_adversary_observer, sensing_noise,
                  simulate, time_averaged_error, trace_to_csv)
from .solvers import (Spectrum, is_hurwitz, place_observer_gain, psd_sqrt,
                      solve_care, solve_lyapunov_ctrl, solve_lyapunov_obs)

__version__ = "0.1.0"

__all__ = [
    "CcpIterate", "CcpResult", "ConfigurationError", "ControllerDesign",
    "CovertLqrError", "DesignWeights", "GramianReport", "InfeasibleError",
    "LinearSystem", "NoiseModel", "PlacementError", "Problem1Variables",
    "RecoveryError", "SimTrace", "SimulationError", "SolverError", "Spectrum",
    "StarMatrices", "SubsetCheckReport", "TradeoffReport", "UnstableMatrixError",
    "ValidationReport", "build_adversary_observer", "build_ccp_subproblem",
    "build_problem1_sdp", "ccp_initialize", "ccp_run", "certify_design",
    "check_controllability", "check_observability", "dc_constraint_values",
    "eigen_report", "f_lambda",
    "gramian_quadrature", "history_to_csv", "is_hurwitz", "j1_lower_bound",
    "j2_lower_bound_global", "j2_lower_bound_local", "linearize_quadratic",
    "metric_j_o1", "metric_j_o2", "observability_gramian", "performance_cost",
    "place_observer_gain", "psd_sqrt", "recover_and_audit", "sensing_noise",
    "simulate", "solve_care", "solve_lyapunov_ctrl", "solve_lyapunov_obs",
    "solve_problem1", "star_matrices", "subset_monotonicity_check",
    "time_averaged_error", "trace_to_csv", "tradeoff_reports", "validate",
]
