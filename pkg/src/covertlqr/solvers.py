"""Dense solvers: Lyapunov, Riccati, matrix square root, observer placement.

Everything here is desk scale (n well below 100).  The Lyapunov equations are
solved by Kronecker vectorization for n <= 30, which keeps the code free of
Schur machinery and is exact to working precision at these sizes; larger
problems fall back to SciPy's Bartels-Stewart.  The Riccati equation is
solved by Newton-Kleinman iteration seeded with a Bass-style stabilizing
gain, so the only primitive it needs is the Lyapunov solver itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConfigurationError, PlacementError, SolverError, UnstableMatrixError
from .model import check_observability

# Eigenvalues with real part above -HURWITZ_MARGIN are treated as unstable.
HURWITZ_MARGIN = 1e-9
KRONECKER_MAX_DIM = 30
LYAPUNOV_RESIDUAL_RTOL = 1e-9
CARE_RESIDUAL_RTOL = 1e-8
CARE_TARGET_RTOL = 1e-10
CARE_MAX_ITERS = 100
PLACEMENT_POLE_SPLIT = 1e-6
PLACEMENT_RETRIES = 10


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a square matrix plus the extremes of their real parts."""

    eigenvalues: np.ndarray
    min_real_part: float

    @property
    def max_real_part(self) -> float:
        return float(self.eigenvalues.real.max())


def spectrum(M: np.ndarray) -> Spectrum:
    ev = np.linalg.eigvals(np.asarray(M, dtype=float))
    return Spectrum(eigenvalues=ev, min_real_part=float(ev.real.min()))


def is_hurwitz(M: np.ndarray) -> tuple[bool, Spectrum]:
    """True iff every eigenvalue has real part below -1e-9."""
    spec = spectrum(M)
    return spec.max_real_part < -HURWITZ_MARGIN, spec


def _opnorm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2))


def solve_lyapunov_obs(A_cl: np.ndarray, Qs: np.ndarray) -> np.ndarray:
    """Solve ``A_cl' W + W A_cl + Qs = 0`` for a Hurwitz ``A_cl``.

    Returns the symmetric PSD solution; raises ``UnstableMatrixError`` for a
    non-Hurwitz input and ``SolverError`` when the vectorized operator is too
    ill conditioned to meet the residual bound.
    """
    A_cl = np.asarray(A_cl, dtype=float)
    Qs = np.asarray(Qs, dtype=float)
    n = A_cl.shape[0]
    if A_cl.shape != (n, n) or Qs.shape != (n, n):
        raise ConfigurationError(
            f"Lyapunov operands must be square and matched, got {A_cl.shape} and {Qs.shape}")
    ok, _ = is_hurwitz(A_cl)
    if not ok:
        raise UnstableMatrixError("unstable matrix: Lyapunov solution is not defined")
    if n <= KRONECKER_MAX_DIM:
        # vec_F(A'W + WA) = (I (x) A' + A' (x) I) vec_F(W)
        op = np.kron(np.eye(n), A_cl.T) + np.kron(A_cl.T, np.eye(n))
        try:
            w = np.linalg.solve(op, -Qs.flatten(order="F"))
        except np.linalg.LinAlgError as exc:
            raise SolverError("ill-conditioned Lyapunov equation") from exc
        W = w.reshape((n, n), order="F")
    else:
        W = scipy.linalg.solve_continuous_lyapunov(A_cl.T, -Qs)
    W = 0.5 * (W + W.T)
    residual = _opnorm(A_cl.T @ W + W @ A_cl + Qs)
    if residual > LYAPUNOV_RESIDUAL_RTOL * (1.0 + _opnorm(W)):
        raise SolverError(
            f"ill-conditioned Lyapunov equation: residual {residual:.3e}")
    return W


def solve_lyapunov_ctrl(A_cl: np.ndarray, Vs: np.ndarray) -> np.ndarray:
    """Solve ``A_cl Z + Z A_cl' + Vs = 0``; transpose dual of :func:`solve_lyapunov_obs`."""
    return solve_lyapunov_obs(np.asarray(A_cl, dtype=float).T, Vs)


def _bass_stabilizing_gain(A: np.ndarray, B: np.ndarray, R: np.ndarray) -> np.ndarray:
    # Classical Bass trick: -(A + sigma I) is Hurwitz for sigma > ||A||, and the
    # controllability-type Lyapunov solution of the reversed system yields a
    # stabilizing gain K0 = -R^-1 B' Z^-1.
    sigma = 1.0 + _opnorm(A)
    BRB = B @ np.linalg.solve(R, B.T)
    Z = solve_lyapunov_ctrl(-(A + sigma * np.eye(A.shape[0])), 2.0 * BRB)
    try:
        return -np.linalg.solve(R, B.T @ np.linalg.inv(Z))
    except np.linalg.LinAlgError as exc:
        raise SolverError("CARE failure: could not seed a stabilizing gain") from exc


def care_residual(A, B, Q, R, P) -> float:
    return _opnorm(A.T @ P + P @ A + Q - P @ B @ np.linalg.solve(R, B.T @ P))


def solve_care(A, B, Q, R) -> tuple[np.ndarray, np.ndarray]:
    """Stabilizing solution of ``A'P + PA + Q - P B R^-1 B' P = 0`` and its gain.

    Newton-Kleinman iteration: each step solves one closed-loop Lyapunov
    equation, and the iterates converge quadratically to the maximal solution
    provided the seed gain is stabilizing.  Returns ``(P_star, K_star)`` with
    ``K_star = -R^-1 B' P_star``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    K = _bass_stabilizing_gain(A, B, R)
    P = None
    for _ in range(CARE_MAX_ITERS):
        P_next = solve_lyapunov_obs(A + B @ K, Q + K.T @ R @ K)
        K = -np.linalg.solve(R, B.T @ P_next)
        done = (P is not None
                and _opnorm(P_next - P) <= 1e-14 * (1.0 + _opnorm(P_next)))
        P = P_next
        if done or care_residual(A, B, Q, R, P) <= CARE_TARGET_RTOL * (1.0 + _opnorm(P) ** 2):
            break
    if care_residual(A, B, Q, R, P) > CARE_RESIDUAL_RTOL * (1.0 + _opnorm(P) ** 2):
        raise SolverError("CARE failure: residual target not reached")
    K = -np.linalg.solve(R, B.T @ P)
    ok, _ = is_hurwitz(A + B @ K)
    if not ok:
        raise SolverError("CARE failure: recovered gain is not stabilizing")
    return P, K


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition of the symmetrized input."""
    M = np.asarray(M, dtype=float)
    S = 0.5 * (M + M.T)
    ev, U = np.linalg.eigh(S)
    tol = 1e-10 * (1.0 + abs(ev).max(initial=0.0))
    if ev.min(initial=0.0) < -tol:
        raise ConfigurationError(f"not PSD: smallest eigenvalue {ev.min():.3e}")
    root = U @ np.diag(np.sqrt(np.clip(ev, 0.0, None))) @ U.T
    return 0.5 * (root + root.T)


def _split_repeated_poles(poles: np.ndarray) -> np.ndarray:
    # The Sylvester construction degenerates for repeated poles (a single
    # output cannot produce a diagonalizable repeated eigenvalue), so split
    # duplicates by +-1e-6*k before placement.  Shifts are real, which keeps
    # conjugate pairs conjugate.
    out = np.array(poles, dtype=complex)
    groups: dict[complex, list[int]] = {}
    for j, p in enumerate(out):
        groups.setdefault(complex(p), []).append(j)
    for value, idxs in groups.items():
        if len(idxs) > 1:
            for k, j in enumerate(idxs):
                sign = 1.0 if k % 2 == 0 else -1.0
                out[j] = value + PLACEMENT_POLE_SPLIT * ((k + 1) // 2) * sign
    return out


def _real_block_diag(poles: np.ndarray) -> np.ndarray:
    """Real matrix with the requested self-conjugate spectrum (2x2 blocks for pairs)."""
    remaining = list(poles)
    blocks = []
    while remaining:
        p = remaining.pop(0)
        if abs(p.imag) < 1e-14:
            blocks.append(np.array([[p.real]]))
        else:
            match = None
            for j, q in enumerate(remaining):
                if abs(q - np.conj(p)) < 1e-9 * max(1.0, abs(p)):
                    match = j
                    break
            if match is None:
                raise ConfigurationError("poles are not closed under conjugation")
            remaining.pop(match)
            a, b = p.real, abs(p.imag)
            blocks.append(np.array([[a, b], [-b, a]]))
    return scipy.linalg.block_diag(*blocks)


def place_observer_gain(A_cl: np.ndarray, C: np.ndarray, poles,
                        rng: np.random.Generator | None = None) -> np.ndarray:
    """Observer gain L with ``eig(A_cl - L C)`` at the requested poles.

    Sylvester method: pick a real G carrying the target spectrum, draw a
    random auxiliary H, solve ``A_cl' X - X G' = C' H`` and set
    ``L = (H X^-1)'``.  H is redrawn (up to 10 times) if X comes out
    singular.  Repeated poles are split by tiny perturbations first, so the
    achieved spectrum is within 1e-6 of the perturbed request.
    """
    A_cl = np.asarray(A_cl, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n, p = A_cl.shape[0], C.shape[0]
    poles = np.asarray(list(poles), dtype=complex)
    if poles.shape != (n,):
        raise ConfigurationError(f"need {n} poles, got {poles.shape}")
    if poles.real.max() >= 0:
        raise ConfigurationError("observer poles must have negative real part")
    if not check_observability(A_cl, C):
        raise PlacementError("pole placement infeasible: pair is not observable")
    if rng is None:
        rng = np.random.default_rng(0)

    target = _split_repeated_poles(poles)
    G = _real_block_diag(target)
    for _ in range(PLACEMENT_RETRIES):
        H = rng.standard_normal((p, n))
        X = scipy.linalg.solve_sylvester(A_cl.T, -G.T, C.T @ H)
        if np.linalg.cond(X) < 1e12:
            L = np.linalg.solve(X.T, H.T)
            achieved = np.sort_complex(np.linalg.eigvals(A_cl - L @ C))
            wanted = np.sort_complex(target)
            if np.max(np.abs(achieved - wanted)) <= 1e-6 * max(1.0, np.abs(wanted).max()):
                return L
    raise PlacementError("pole placement failed: auxiliary matrix stayed singular")
