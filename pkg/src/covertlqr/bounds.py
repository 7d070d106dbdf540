"""Theoretical limits of observability reduction under a performance budget.

``f_lambda`` bounds how far any budget-feasible gain can move from the LQR
gain; from it follow a lower bound on the achievable trace metric, a local
lower bound on the trace-inverse metric (valid only while two denominators
stay positive), and a global bound that leans on the epsilon regularization.
All norms are spectral norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .gramians import metric_j_o2, observability_gramian
from .model import DesignWeights, LinearSystem
from .solvers import solve_care, solve_lyapunov_ctrl, solve_lyapunov_obs

SUBSET_CHECK_RTOL = 1e-9


@dataclass(frozen=True)
class StarMatrices:
    """Lyapunov/Riccati solutions at the nominal closed loop ``A + B K_star``.

    ``Z_star`` absorbs V, ``S_star`` and ``U_star`` absorb the identity on the
    controllability and observability sides respectively.
    """

    Z_star: np.ndarray
    S_star: np.ndarray
    U_star: np.ndarray
    K_star: np.ndarray
    P_star: np.ndarray


@dataclass(frozen=True)
class TradeoffReport:
    """One budget point: the gain-distance bound and the three metric bounds.

    ``j2_lower_local_proof_form`` evaluates the variant of the local bound
    whose inner trace is weighted by ``V^-1``; with ``V = I`` it coincides
    with ``j2_lower_local``.  ``j2_lower_best`` is the tighter of the valid
    local bound and the global one.
    """

    lam: float
    f_lambda: float
    j1_lower: float
    j2_lower_local: float
    j2_lower_local_valid: bool
    j2_lower_local_proof_form: float
    j2_lower_global: float
    j2_lower_best: float


def star_matrices(sys: LinearSystem, Q, R, V) -> StarMatrices:
    P_star, K_star = solve_care(sys.A, sys.B, Q, R)
    A_cl = sys.A + sys.B @ K_star
    n = sys.n
    return StarMatrices(
        Z_star=solve_lyapunov_ctrl(A_cl, np.asarray(V, dtype=float)),
        S_star=solve_lyapunov_ctrl(A_cl, np.eye(n)),
        U_star=solve_lyapunov_obs(A_cl, np.eye(n)),
        K_star=K_star,
        P_star=P_star,
    )


def _norm(M) -> float:
    return float(np.linalg.norm(np.asarray(M, dtype=float), 2))


def _lam_min(M) -> float:
    M = np.asarray(M, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())


def f_lambda(lam: float, stars: StarMatrices, B, R, V) -> float:
    """Upper bound on ``||K - K_star||`` for any gain within budget ``lam``.

    Behaves like sqrt(lam) for small budgets and linearly for large ones;
    the lam = 0 value is the continuity limit 0.
    """
    if lam < 0:
        raise ConfigurationError("lambda negative")
    if lam == 0:
        return 0.0
    zn = _norm(stars.Z_star)
    zmin = _lam_min(stars.Z_star)
    rmin = _lam_min(R)
    bn = _norm(B)
    vinv = 1.0 / _lam_min(V)
    lead = lam * zn * vinv * bn / (zmin * rmin)
    inner = 1.0 + zmin * rmin / (lam * zn ** 2 * vinv ** 2 * bn ** 2)
    return lead * (1.0 + math.sqrt(inner))


def j1_lower_bound(lam: float, stars: StarMatrices, B, V,
                   j1_at_zero: float, f_lam: float) -> float:
    """Lower bound on the optimal ``tr(W V)``, anchored at the lam = 0 value."""
    vinv = 1.0 / _lam_min(V)
    denom = 1.0 + 2.0 * float(np.trace(stars.Z_star)) * f_lam * vinv * _norm(B)
    return j1_at_zero / denom


def j2_lower_bound_local(lam: float, stars: StarMatrices, B, V,
                         w_eps_zero: np.ndarray, f_lam: float,
                         proof_form: bool = False) -> tuple[float, bool]:
    """Local lower bound on the optimal ``-tr(W_eps^-1 V^-1)``.

    Valid only while ``1 - 2 tr(S_star) f ||B|| > 0`` and the outer
    denominator stays in (0, 1]; the flag reports pointwise validity.  With
    ``proof_form=True`` the inner trace is ``tr(W0^-1 V^-1)`` instead of
    ``tr(W0^-1)``.
    """
    V = np.asarray(V, dtype=float)
    w0 = np.asarray(w_eps_zero, dtype=float)
    j2_zero = metric_j_o2(w0, V)
    ev_v = np.linalg.eigvalsh(0.5 * (V + V.T))
    kappa_v = float(ev_v.max() / ev_v.min())
    w0_inv = np.linalg.inv(w0)
    tr_w0_inv = float(np.trace(w0_inv @ np.linalg.inv(V))) if proof_form \
        else float(np.trace(w0_inv))
    inner = 1.0 - 2.0 * float(np.trace(stars.S_star)) * f_lam * _norm(B)
    if inner <= 0:
        return float("-inf"), False
    numer = (2.0 * kappa_v * f_lam * _norm(V) * _norm(B) * _norm(stars.U_star)
             * float(np.trace(w0)) * tr_w0_inv)
    denom = 1.0 - numer / inner
    if not (0.0 < denom <= 1.0):
        return float("-inf"), False
    return j2_zero / denom, True


def j2_lower_bound_global(lam: float, stars: StarMatrices, B, V,
                          epsilon: float, a_clstar_norm: float,
                          f_lam: float) -> float:
    """Global lower bound on ``-tr(W_eps^-1 V^-1)``; finite for every lam."""
    tr_vinv = float(np.trace(np.linalg.inv(np.asarray(V, dtype=float))))
    return -2.0 * tr_vinv * (a_clstar_norm + _norm(B) * f_lam) / epsilon


def tradeoff_reports(sys: LinearSystem, w: DesignWeights,
                     lambdas) -> list[TradeoffReport]:
    """Evaluate the bound family over a budget grid, sharing the star solves."""
    stars = star_matrices(sys, w.Q, w.R, w.V)
    A_cl = sys.A + sys.B @ stars.K_star
    a_norm = _norm(A_cl)
    w_zero = solve_lyapunov_obs(A_cl, sys.C.T @ sys.C)
    w_eps_zero = observability_gramian(sys, stars.K_star, w.epsilon)
    j1_zero = float(np.trace(w_zero @ w.V))
    out = []
    for lam in lambdas:
        lam = float(lam)
        f = f_lambda(lam, stars, sys.B, w.R, w.V)
        j1 = j1_lower_bound(lam, stars, sys.B, w.V, j1_zero, f)
        j2_loc, valid = j2_lower_bound_local(lam, stars, sys.B, w.V,
                                             w_eps_zero, f)
        j2_proof, _ = j2_lower_bound_local(lam, stars, sys.B, w.V,
                                           w_eps_zero, f, proof_form=True)
        j2_glob = j2_lower_bound_global(lam, stars, sys.B, w.V, w.epsilon,
                                        a_norm, f)
        best = max(j2_loc, j2_glob) if valid else j2_glob
        out.append(TradeoffReport(
            lam=lam, f_lambda=f, j1_lower=j1,
            j2_lower_local=j2_loc, j2_lower_local_valid=valid,
            j2_lower_local_proof_form=j2_proof,
            j2_lower_global=j2_glob, j2_lower_best=best))
    return out


@dataclass(frozen=True)
class SubsetCheckReport:
    """Metric comparison between the full sensing matrix and a row subset."""

    j_o1_full: float
    j_o1_subset: float
    j_o2_full: float
    j_o2_subset: float
    j_o1_ordered: bool
    j_o2_ordered: bool
    j_o2_compared: bool
    passed: bool


def subset_monotonicity_check(sys: LinearSystem, K, C_hat, row_map,
                              V=None) -> SubsetCheckReport:
    """Check that dropping sensor rows can only shrink both metrics.

    ``row_map`` states which row of C each row of ``C_hat`` is; the rows must
    match exactly.  Metrics are weighted by ``V`` (identity by default).  The
    inverse-metric comparison is skipped (and reported as such) when either
    side is unbounded.
    """
    rows = list(row_map)
    C_hat = np.asarray(C_hat, dtype=float).reshape(len(rows), sys.n)
    if any(r < 0 or r >= sys.p for r in rows):
        raise ConfigurationError("row_map indexes outside the rows of C")
    if not np.array_equal(C_hat, sys.C[rows, :]):
        raise ConfigurationError("row_map inconsistent: C_hat rows are not rows of C")
    w_full = observability_gramian(sys, K)
    if rows:
        w_sub = observability_gramian(LinearSystem(sys.A, sys.B, C_hat), K)
    else:
        w_sub = np.zeros((sys.n, sys.n))
    V = np.eye(sys.n) if V is None else np.asarray(V, dtype=float)
    j1_full = float(np.trace(w_full @ V))
    j1_sub = float(np.trace(w_sub @ V))
    j2_full = metric_j_o2(w_full, V)
    j2_sub = metric_j_o2(w_sub, V)
    slack1 = SUBSET_CHECK_RTOL * max(1.0, abs(j1_full))
    j1_ok = j1_sub <= j1_full + slack1
    compared = math.isfinite(j2_full) and math.isfinite(j2_sub)
    if compared:
        j2_ok = j2_sub <= j2_full + SUBSET_CHECK_RTOL * max(1.0, abs(j2_full))
    else:
        # an unbounded subset metric (-inf) trivially respects the ordering
        j2_ok = True
    return SubsetCheckReport(
        j_o1_full=j1_full, j_o1_subset=j1_sub,
        j_o2_full=j2_full, j_o2_subset=j2_sub,
        j_o1_ordered=j1_ok, j_o2_ordered=j2_ok, j_o2_compared=compared,
        passed=j1_ok and j2_ok)
