"""Exact minimization of the average-observability metric ``tr(W V)``.

After the change of variables ``X = K S`` (S the closed-loop controllability
Gramian of V), the problem becomes a genuine SDP: linear objective
``tr(C S C')``, one affine Lyapunov equality, one scalar budget row, and a
2x2 block LMI that encodes the input-energy term through a Schur complement.
The gain is recovered as ``K = X S^-1`` and every certificate is recomputed
from fresh Lyapunov solves at the recovered gain, so the audit does not
inherit SDP tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sdp
from .exceptions import RecoveryError, SolverError
from .gramians import certify_design
from .model import ControllerDesign, DesignWeights, LinearSystem, validate
from .solvers import is_hurwitz, psd_sqrt, solve_care, solve_lyapunov_ctrl

S_RECOVERY_RTOL = 1e-9
BUDGET_AUDIT_TOL = 1e-6
OBJECTIVE_AUDIT_RTOL = 1e-6
S_CONSISTENCY_RTOL = 1e-6


@dataclass(frozen=True)
class Problem1Variables:
    """Solved SDP variables: gain factor X, Gramian S, input-energy bound Z."""

    X: np.ndarray
    S: np.ndarray
    Z: np.ndarray


def build_problem1_sdp(sys: LinearSystem, w: DesignWeights,
                       P_star: np.ndarray) -> sdp.SdpModel:
    """Assemble the SDP: objective tr(CSC'), Lyapunov equality, budget, block LMI."""
    n, m = sys.n, sys.m
    A, B, C = sys.A, sys.B, sys.C
    R_sqrt = psd_sqrt(w.R)
    model = sdp.SdpModel()
    X = model.add_variable("X", m, n)
    S = model.add_symmetric("S", n)
    Z = model.add_symmetric("Z", m)

    model.add_equality(A @ S + B @ X + S @ A.T + X.T @ B.T + w.V)
    budget = float(np.trace(P_star @ w.V)) + w.lam
    model.add_scalar_ineq(sdp.trace(S @ w.Q) + sdp.trace(Z) - budget * np.eye(1))
    gram_block = sdp.block([[Z, R_sqrt @ X],
                            [X.T @ R_sqrt, S]])
    model.add_lmi(-gram_block)
    model.add_psd("Z")
    model.add_psd("S")
    model.minimize(sdp.trace(C @ S @ C.T))
    return model


def recover_and_audit(sol: Problem1Variables, sys: LinearSystem,
                      w: DesignWeights, P_star: np.ndarray,
                      sdp_objective: float | None = None) -> ControllerDesign:
    """Recover ``K = X S^-1`` and certify it against the budget and objective."""
    S = 0.5 * (sol.S + sol.S.T)
    s_min = float(np.linalg.eigvalsh(S).min())
    if s_min <= S_RECOVERY_RTOL * max(1.0, np.linalg.norm(S, 2)):
        raise RecoveryError(
            f"recovery failure: S is numerically singular (lambda_min={s_min:.3e})")
    K = np.linalg.solve(S, sol.X.T).T
    ok, _ = is_hurwitz(sys.A + sys.B @ K)
    if not ok:
        raise SolverError("recovered gain is not stabilizing")
    design = certify_design(sys, w, K, epsilon=0.0, P_star=P_star)
    if design.performance_slack < -BUDGET_AUDIT_TOL:
        raise SolverError(
            f"budget audit failed: slack {design.performance_slack:.3e}")
    if sdp_objective is not None:
        rel = abs(design.J_o1 - sdp_objective) / max(1.0, abs(sdp_objective))
        if rel > OBJECTIVE_AUDIT_RTOL:
            raise SolverError(
                f"objective audit failed: tr(WV)={design.J_o1:.6e} vs SDP {sdp_objective:.6e}")
    S_check = solve_lyapunov_ctrl(sys.A + sys.B @ K, w.V)
    if np.linalg.norm(S_check - S, 2) > S_CONSISTENCY_RTOL * (1.0 + np.linalg.norm(S, 2)):
        raise SolverError("change-of-variables audit failed: S mismatch")
    return design


def solve_problem1(sys: LinearSystem, w: DesignWeights) -> ControllerDesign:
    """One-shot design: solve the SDP, recover the gain, audit everything.

    With ``lam = 0`` the budget pins the LQR gain, so this degenerates to the
    nominal design.  Infeasibility cannot occur for a validated config (the
    LQR gain is always feasible) and is reported as an internal solver error.
    """
    validate(sys, w).raise_if_invalid()
    P_star, _ = solve_care(sys.A, sys.B, w.Q, w.R)
    model = build_problem1_sdp(sys, w, P_star)
    solution = sdp.solve(model)
    if solution.status == sdp.STATUS_INFEASIBLE:
        raise SolverError(
            "internal error: Problem 1 SDP reported infeasible although the "
            "LQR gain is always feasible for lambda >= 0")
    if solution.status != sdp.STATUS_OPTIMAL:
        raise SolverError(f"Problem 1 SDP failed with status {solution.status!r}")
    sol = Problem1Variables(X=solution.values["X"], S=solution.values["S"],
                            Z=solution.values["Z"])
    return recover_and_audit(sol, sys, w, P_star,
                             sdp_objective=solution.objective)
