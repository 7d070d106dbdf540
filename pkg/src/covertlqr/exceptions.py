"""Exception hierarchy shared across the toolkit."""


class CovertLqrError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(CovertLqrError):
    """Invalid problem data: dimension mismatch, indefinite weights, bad config file."""


class UnstableMatrixError(CovertLqrError):
    """An operation that requires a Hurwitz matrix received an unstable one."""


class SolverError(CovertLqrError):
    """Numerical failure: ill-conditioned equation, CARE divergence, SDP breakdown."""


class InfeasibleError(CovertLqrError):
    """A program that should admit a solution was reported infeasible."""


class PlacementError(CovertLqrError):
    """Observer pole placement is infeasible for the given pair."""


class RecoveryError(CovertLqrError):
    """Gain recovery from SDP variables failed (near-singular S)."""


class SimulationError(CovertLqrError):
    """Step-size rejection or non-finite state during integration."""
