"""Domain types for the plant, the adversary's sensing, and the design weights.

The operator controls ``xdot = A x + B u`` with full state feedback ``u = K x``
while an adversary watches ``y = C x``.  A design is judged by the expected
LQR cost ``J_s = tr(P V)`` and by how observable the closed loop remains
through ``C``.  This module holds the immutable value types shared by every
other module plus the structural checks (controllability, observability,
weight definiteness) that gate the designers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError

# Rank decisions use singular values against a dimension-aware threshold.
RANK_RTOL = 1e-12
# PD/PSD eigenvalue tests are relative to the matrix norm.
DEFINITENESS_RTOL = 1e-10


def _as_matrix(M, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(M, dtype=float))
    if arr.ndim != 2:
        raise ConfigurationError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def _symmetrized(M: np.ndarray) -> np.ndarray:
    # Tolerates asymmetric rounding in user input.
    return 0.5 * (M + M.T)


def is_psd(M: np.ndarray, rtol: float = DEFINITENESS_RTOL) -> bool:
    S = _symmetrized(np.asarray(M, dtype=float))
    ev = np.linalg.eigvalsh(S)
    return bool(ev.min() >= -rtol * max(1.0, np.linalg.norm(S, 2)))


def is_pd(M: np.ndarray, rtol: float = DEFINITENESS_RTOL) -> bool:
    S = _symmetrized(np.asarray(M, dtype=float))
    ev = np.linalg.eigvalsh(S)
    return bool(ev.min() > rtol * np.linalg.norm(S, 2))


@dataclass(frozen=True)
class LinearSystem:
    """Plant ``(A, B)`` plus the adversary's sensing matrix ``C``.

    Dimensional consistency is enforced at construction; controllability of
    ``(A, B)`` is checked by :func:`validate` so that diagnostic helpers can
    still be run on uncontrollable data.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "B", _as_matrix(self.B, "B"))
        object.__setattr__(self, "C", _as_matrix(self.C, "C"))
        n, nc = self.A.shape
        if n != nc:
            raise ConfigurationError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ConfigurationError(
                f"B must have {n} rows to match A, got {self.B.shape}")
        if self.C.shape[1] != n:
            raise ConfigurationError(
                f"C must have {n} columns to match A, got {self.C.shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class DesignWeights:
    """Cost weights, initial-state covariance and algorithm parameters.

    ``lam`` is the performance budget: a design may exceed the optimal LQR
    cost by at most ``lam``.  ``epsilon`` regularizes the observability
    Gramian so its inverse stays bounded; ``delta`` is the stopping tolerance
    of the sequential-SDP designer.
    """

    Q: np.ndarray
    R: np.ndarray
    V: np.ndarray
    lam: float
    epsilon: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "Q", _as_matrix(self.Q, "Q"))
        object.__setattr__(self, "R", _as_matrix(self.R, "R"))
        object.__setattr__(self, "V", _as_matrix(self.V, "V"))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "delta", float(self.delta))
        for name in ("Q", "R", "V"):
            M = getattr(self, name)
            if M.shape[0] != M.shape[1]:
                raise ConfigurationError(f"{name} must be square, got {M.shape}")


@dataclass(frozen=True)
class ControllerDesign:
    """An accepted feedback gain together with its certificates.

    ``P`` solves the closed-loop Lyapunov equation with ``Q + K'RK`` and
    certifies the cost ``J_s = tr(P V)``; ``W`` is the observability Gramian
    the metrics were computed from (epsilon-regularized for the trace-inverse
    designer).  ``performance_slack = lam - tr((P - P*) V)`` must be
    nonnegative up to the audit tolerance.  ``J_o2`` is ``-inf`` when the
    Gramian is numerically singular.
    """

    K: np.ndarray
    P: np.ndarray
    W: np.ndarray
    J_s: float
    J_o1: float
    J_o2: float
    performance_slack: float


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate`: empty ``issues`` means the config is usable."""

    ok: bool
    issues: tuple = field(default_factory=tuple)

    def raise_if_invalid(self):
        if not self.ok:
            raise ConfigurationError("; ".join(self.issues))


def _rank(M: np.ndarray) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0:
        return 0
    thresh = max(M.shape) * sv[0] * RANK_RTOL
    return int(np.count_nonzero(sv > thresh))


def check_controllability(sys: LinearSystem) -> bool:
    """Kalman rank test on ``(A, B)`` with a singular-value threshold."""
    A, B, n = sys.A, sys.B, sys.n
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return _rank(np.hstack(blocks)) == n


def check_observability(A_cl: np.ndarray, C: np.ndarray) -> bool:
    """Kalman rank test on ``(A_cl, C)``; used to diagnose near-unobservable designs."""
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A_cl.shape[0]
    if A_cl.shape[0] != A_cl.shape[1]:
        raise ConfigurationError(f"A_cl must be square, got {A_cl.shape}")
    if C.shape[1] != n:
        raise ConfigurationError(
            f"C must have {n} columns to match A_cl, got {C.shape}")
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A_cl)
    return _rank(np.vstack(blocks)) == n


def validate(sys: LinearSystem, w: DesignWeights) -> ValidationReport:
    """Check every invariant the designers rely on; report all violations at once."""
    issues = []
    n, m = sys.n, sys.m
    if w.Q.shape != (n, n):
        issues.append(f"Q has shape {w.Q.shape}, expected ({n}, {n})")
    if w.R.shape != (m, m):
        issues.append(f"R has shape {w.R.shape}, expected ({m}, {m})")
    if w.V.shape != (n, n):
        issues.append(f"V has shape {w.V.shape}, expected ({n}, {n})")
    if not issues:
        if not is_psd(w.Q):
            issues.append("Q not positive semidefinite")
        if not is_pd(w.R):
            issues.append("R not positive definite")
        if not is_pd(w.V):
            issues.append("V not positive definite")
    if w.lam < 0:
        issues.append("lambda negative")
    if not w.epsilon > 0:
        issues.append("epsilon not positive")
    if not w.delta > 0:
        issues.append("delta not positive")
    if not check_controllability(sys):
        issues.append("(A, B) not controllable")
    return ValidationReport(ok=not issues, issues=tuple(issues))
