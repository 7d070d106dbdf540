"""Closed-loop simulation against a Luenberger-observer adversary.

The plant runs ``xdot = (A + BK) x`` under the designed feedback while the
adversary integrates ``xhatdot = (A + BK) xhat + L (ytilde - C xhat)`` from
the noise-corrupted measurement ``ytilde = C x + eta(t)``.  The adversary
predicts with the closed-loop matrix: it cannot measure the input, but it is
assumed to know the deployed gain, which is the stronger (and therefore more
conservative) adversary model.  Sensing noise is a deterministic sum of
sinusoids in the band 0 to 1/(2 pi) Hz.

Integration is fixed-step RK4 on the stacked state (x, xhat, running cost).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, SimulationError, UnstableMatrixError
from .model import LinearSystem
from .solvers import is_hurwitz, place_observer_gain

# band of admissible angular frequencies, rad/s (0 to 1/(2 pi) Hz)
NOISE_BAND = (0.0, 1.0)
DEFAULT_NUM_SINUSOIDS = 5
DEFAULT_NOISE_MAGNITUDE = 0.01
OBSERVER_GAIN_WARN = 1e6
# RK4 stability heuristic: dt below a tenth of the fastest time constant
STEP_SAFETY = 0.1


@dataclass(frozen=True)
class NoiseModel:
    """Deterministic multi-sinusoid sensing corruption.

    ``phases`` has one row per output channel and one column per sinusoid;
    channel i sees ``sum_k magnitude * sin(w_k t + phases[i, k])``.
    """

    magnitude: float
    num_sinusoids: int
    angular_frequencies: np.ndarray
    phases: np.ndarray
    seed: int = 0

    def __post_init__(self):
        freqs = np.asarray(self.angular_frequencies, dtype=float)
        phases = np.atleast_2d(np.asarray(self.phases, dtype=float))
        if freqs.shape != (self.num_sinusoids,):
            raise ConfigurationError(
                f"need {self.num_sinusoids} frequencies, got {freqs.shape}")
        if phases.shape[1] != self.num_sinusoids:
            raise ConfigurationError(
                f"phases must have {self.num_sinusoids} columns, got {phases.shape}")
        if freqs.min(initial=0.0) < NOISE_BAND[0] or freqs.max(initial=0.0) > NOISE_BAND[1]:
            raise ConfigurationError(
                f"angular frequencies must lie in {NOISE_BAND} rad/s")
        object.__setattr__(self, "angular_frequencies", freqs)
        object.__setattr__(self, "phases", phases)

    @staticmethod
    def default(p: int, magnitude: float = DEFAULT_NOISE_MAGNITUDE,
                num_sinusoids: int = DEFAULT_NUM_SINUSOIDS,
                seed: int = 0, random_phases: bool = False) -> "NoiseModel":
        """Equally spaced frequencies k/num across the band; phases 0 or seeded."""
        freqs = np.arange(1, num_sinusoids + 1) / num_sinusoids * NOISE_BAND[1]
        if random_phases:
            rng = np.random.default_rng(seed)
            phases = rng.uniform(0.0, 2.0 * np.pi, size=(p, num_sinusoids))
        else:
            phases = np.zeros((p, num_sinusoids))
        return NoiseModel(magnitude=magnitude, num_sinusoids=num_sinusoids,
                          angular_frequencies=freqs, phases=phases, seed=seed)


def sensing_noise(model: NoiseModel, t: float) -> np.ndarray:
    """Noise vector at time t, one entry per output channel."""
    args = model.angular_frequencies[None, :] * t + model.phases
    return model.magnitude * np.sin(args).sum(axis=1)


@dataclass(frozen=True)
class SimTrace:
    """Aligned trajectories on a uniform grid; ``cost`` is nondecreasing."""

    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    e: np.ndarray
    y: np.ndarray
    y_noisy: np.ndarray
    cost: np.ndarray


def build_adversary_observer(sys: LinearSystem, K, poles,
                             rng: np.random.Generator | None = None) -> np.ndarray:
    """Observer gain for the adversary watching the closed loop through C.

    Near-unobservable closed loops produce enormous gains; those are allowed
    but flagged with a warning, since that blow-up is exactly the designed
    effect.
    """
    A_cl = sys.A + sys.B @ np.asarray(K, dtype=float)
    L = place_observer_gain(A_cl, sys.C, poles, rng=rng)
    gain_norm = float(np.linalg.norm(L, 2))
    if gain_norm > OBSERVER_GAIN_WARN:
        warnings.warn(
            f"observer gain norm {gain_norm:.3e} is very large; the closed "
            "loop is near-unobservable", RuntimeWarning, stacklevel=2)
    return L


def simulate(sys: LinearSystem, K, L, noise: NoiseModel, x0, xhat0,
             horizon: float, dt: float, Q=None, R=None) -> SimTrace:
    """Integrate plant, observer and running cost with fixed-step RK4.

    ``Q`` and ``R`` weight the running cost ``int (x'Qx + u'Ru) dt`` with
    ``u = K x``; both default to identity.  Raises on a non-Hurwitz closed
    loop, on a step size violating the stability heuristic, and on numeric
    blow-up.
    """
    K = np.asarray(K, dtype=float)
    L = np.asarray(L, dtype=float)
    A_cl = sys.A + sys.B @ K
    ok, spec_cl = is_hurwitz(A_cl)
    if not ok:
        raise UnstableMatrixError("unstable gain: closed loop is not Hurwitz")
    n, p = sys.n, sys.p
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    R = np.eye(sys.m) if R is None else np.asarray(R, dtype=float)
    x0 = np.asarray(x0, dtype=float).reshape(n)
    xhat0 = np.asarray(xhat0, dtype=float).reshape(n)

    obs_eigs = np.linalg.eigvals(A_cl - L @ sys.C)
    fastest = max(abs(spec_cl.eigenvalues.real).max(), abs(obs_eigs.real).max())
    if dt > STEP_SAFETY / fastest:
        raise SimulationError(
            f"step-size rejection: dt={dt:g} exceeds {STEP_SAFETY / fastest:g} "
            "for the fastest closed-loop/observer mode")

    C = sys.C
    cost_weight = Q + K.T @ R @ K
    steps = int(round(horizon / dt))

    def derivative(t, x, xhat, _cost):
        eta = sensing_noise(noise, t)
        dx = A_cl @ x
        # innovation form keeps e identically zero (bitwise) when xhat == x
        # and the noise vanishes
        dxhat = A_cl @ xhat + L @ (C @ x + eta - C @ xhat)
        dcost = float(x @ cost_weight @ x)
        return dx, dxhat, dcost

    t_grid = np.arange(steps + 1) * dt
    xs = np.empty((steps + 1, n))
    xhats = np.empty((steps + 1, n))
    costs = np.empty(steps + 1)
    xs[0], xhats[0], costs[0] = x0, xhat0, 0.0
    x, xhat, cost = x0.copy(), xhat0.copy(), 0.0
    for k in range(steps):
        t = k * dt
        k1 = derivative(t, x, xhat, cost)
        k2 = derivative(t + dt / 2, x + dt / 2 * k1[0], xhat + dt / 2 * k1[1], 0.0)
        k3 = derivative(t + dt / 2, x + dt / 2 * k2[0], xhat + dt / 2 * k2[1], 0.0)
        k4 = derivative(t + dt, x + dt * k3[0], xhat + dt * k3[1], 0.0)
        x = x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        xhat = xhat + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        cost = cost + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xhat))):
            raise SimulationError(f"non-finite state at t={t + dt:g}; reduce dt")
        xs[k + 1], xhats[k + 1], costs[k + 1] = x, xhat, cost

    y = xs @ C.T
    eta = np.stack([sensing_noise(noise, t) for t in t_grid])
    return SimTrace(t=t_grid, x=xs, xhat=xhats, e=xs - xhats,
                    y=y, y_noisy=y + eta, cost=costs)


def trace_to_csv(trace: SimTrace, path: str):
    """Write the trace in the documented CSV layout, floats as %.12g."""
    n = trace.x.shape[1]
    cols = (["t"] + [f"x{i+1}" for i in range(n)]
            + [f"xhat{i+1}" for i in range(n)]
            + [f"e{i+1}" for i in range(n)] + ["cost"])
    data = np.column_stack([trace.t, trace.x, trace.xhat, trace.e, trace.cost])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(format(v, ".12g") for v in row) + "\n")


def time_averaged_error(trace: SimTrace, start_fraction: float = 0.5) -> float:
    """Mean estimation-error norm over the trailing part of the horizon."""
    k0 = int(len(trace.t) * start_fraction)
    return float(np.linalg.norm(trace.e[k0:], axis=1).mean())
