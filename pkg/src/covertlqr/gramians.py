"""Performance cost, observability Gramians and the two adversary metrics.

For a stabilizing gain K the adversary's view of the closed loop is captured
by the Gramian W solving ``(A+BK)' W + W (A+BK) + C'C = 0``.  The average
visibility is ``J_o1 = tr(W V)`` (the expected output energy) and the
worst-direction visibility is ``J_o2 = -tr(W^-1 V^-1)``, which blows up to
-inf as the closed loop approaches unobservability.  Adding ``epsilon*I`` to
``C'C`` keeps the inverse metric finite for every stabilizing gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import UnstableMatrixError
from .model import ControllerDesign, DesignWeights, LinearSystem
from .solvers import is_hurwitz, solve_care, solve_lyapunov_obs

# lambda_min(W) at or below this (times max(1, ||W||)) marks W as singular
# for the inverse metric: separates rank loss from round-off at desk scale.
SINGULAR_GRAMIAN_RTOL = 1e-12
QUADRATURE_STEP_SCALE = 1e-3


@dataclass(frozen=True)
class GramianReport:
    """Table row for one Gramian: traces plus the descending spectrum.

    ``trace_W_inv`` is ``inf`` when the Gramian is numerically singular.
    """

    trace_W: float
    trace_W_inv: float
    eigenvalues: np.ndarray


def _closed_loop(sys: LinearSystem, K: np.ndarray) -> np.ndarray:
    A_cl = sys.A + sys.B @ np.asarray(K, dtype=float)
    ok, _ = is_hurwitz(A_cl)
    if not ok:
        raise UnstableMatrixError("unstable gain: closed loop is not Hurwitz")
    return A_cl


def performance_cost(sys: LinearSystem, K, Q, R, V) -> tuple[float, np.ndarray]:
    """Expected LQR cost ``tr(P V)`` and its Lyapunov certificate P."""
    K = np.asarray(K, dtype=float)
    A_cl = _closed_loop(sys, K)
    P = solve_lyapunov_obs(A_cl, Q + K.T @ R @ K)
    return float(np.trace(P @ V)), P


def observability_gramian(sys: LinearSystem, K, epsilon: float = 0.0) -> np.ndarray:
    """Gramian of ``(A+BK, C)``; with epsilon > 0 the regularized variant."""
    A_cl = _closed_loop(sys, K)
    Qs = sys.C.T @ sys.C + float(epsilon) * np.eye(sys.n)
    return solve_lyapunov_obs(A_cl, Qs)


def metric_j_o1(W: np.ndarray, V: np.ndarray) -> float:
    return float(np.trace(W @ V))


def metric_j_o2(W: np.ndarray, V: np.ndarray) -> float:
    """``-tr(W^-1 V^-1)``, or ``-inf`` when W is numerically singular."""
    W = 0.5 * (W + W.T)
    ev = np.linalg.eigvalsh(W)
    if ev.min() <= SINGULAR_GRAMIAN_RTOL * max(1.0, abs(ev).max()):
        return float("-inf")
    return float(-np.trace(np.linalg.solve(W, np.linalg.inv(V))))


_QUAD_CHUNK = 4096
_QUAD_MAX_NODES = 20_000_000


def gramian_quadrature(A_cl: np.ndarray, Qs: np.ndarray,
                       horizon_tol: float = 1e-12) -> np.ndarray:
    """Composite-Simpson quadrature of ``int exp(A't) Qs exp(At) dt``.

    Independent of the Lyapunov route: the transition matrix is propagated
    node by node (in batched chunks) and the integral is truncated at the
    first even node where ``||exp(A t)||`` falls below ``horizon_tol``.  The
    step resolves the fastest mode of ``A_cl``.
    """
    A_cl = np.asarray(A_cl, dtype=float)
    Qs = np.asarray(Qs, dtype=float)
    ok, spec = is_hurwitz(A_cl)
    if not ok:
        raise UnstableMatrixError("unstable matrix: Gramian integral diverges")
    n = A_cl.shape[0]
    h = QUADRATURE_STEP_SCALE / abs(spec.min_real_part)
    E = scipy.linalg.expm(A_cl * h)

    # Powers E^0 .. E^(chunk-1) assembled by doubling, then whole chunks are
    # advanced with E^chunk so each node costs one batched matmul.
    pows = np.eye(n)[None, :, :]
    while pows.shape[0] < _QUAD_CHUNK:
        pows = np.concatenate([pows, pows[-1] @ E @ pows], axis=0)
    pows = pows[:_QUAD_CHUNK]
    E_chunk = pows[-1] @ E

    weights = np.where(np.arange(_QUAD_CHUNK) % 2 == 1, 4.0, 2.0)
    F_start = np.eye(n)
    total = np.zeros((n, n))
    g0 = Qs.copy()
    start = 0
    while True:
        block = F_start @ pows                     # nodes start .. start+chunk-1
        fro = np.sqrt((block ** 2).sum(axis=(1, 2)))
        g = np.matmul(block.transpose(0, 2, 1), np.matmul(Qs, block))
        idx = np.flatnonzero((fro < horizon_tol)
                             & (np.arange(start, start + _QUAD_CHUNK) % 2 == 0)
                             & (np.arange(start, start + _QUAD_CHUNK) > 0))
        if idx.size:
            stop = idx[0]
            total += np.einsum("k,kij->ij", weights[:stop], g[:stop])
            total += g[stop]                       # closing endpoint, weight 1
            break
        total += np.einsum("k,kij->ij", weights, g)
        F_start = F_start @ E_chunk
        start += _QUAD_CHUNK
        if start > _QUAD_MAX_NODES:
            raise UnstableMatrixError(
                "Gramian quadrature horizon too long; matrix is too stiff")
    # node 0 was accumulated with weight 2 in the first chunk; correct to 1.
    W = (h / 3.0) * (total - g0)
    return 0.5 * (W + W.T)


def eigen_report(W: np.ndarray) -> GramianReport:
    """Descending spectrum and traces of a PSD Gramian."""
    W = 0.5 * (np.asarray(W, dtype=float) + np.asarray(W, dtype=float).T)
    ev = np.sort(np.linalg.eigvalsh(W))[::-1]
    ev = np.clip(ev, 0.0, None)
    if ev.size and ev.min() > SINGULAR_GRAMIAN_RTOL * max(1.0, ev.max()):
        trace_inv = float(np.sum(1.0 / ev))
    else:
        trace_inv = float("inf")
    return GramianReport(trace_W=float(ev.sum()), trace_W_inv=trace_inv,
                         eigenvalues=ev)


def certify_design(sys: LinearSystem, w: DesignWeights, K,
                   epsilon: float = 0.0,
                   P_star: np.ndarray | None = None) -> ControllerDesign:
    """Assemble a :class:`ControllerDesign` for a gain from first principles.

    P and W come from fresh Lyapunov solves at K, so the certificates do not
    inherit any optimizer tolerance.  ``epsilon`` selects which Gramian the
    metrics are computed from.
    """
    K = np.asarray(K, dtype=float)
    if P_star is None:
        P_star, _ = solve_care(sys.A, sys.B, w.Q, w.R)
    J_s, P = performance_cost(sys, K, w.Q, w.R, w.V)
    W = observability_gramian(sys, K, epsilon)
    slack = w.lam - float(np.trace((P - P_star) @ w.V))
    return ControllerDesign(K=K, P=P, W=W, J_s=J_s,
                            J_o1=metric_j_o1(W, w.V),
                            J_o2=metric_j_o2(W, w.V),
                            performance_slack=slack)
