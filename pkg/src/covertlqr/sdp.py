"""Minimal semidefinite-programming layer: affine matrix expressions over
named matrix variables, four constraint kinds (LMI <= 0, affine equality,
affine scalar inequality, PSD variable), a linear objective, and a solve
contract with audited residuals.

The backend is an ecosystem conic solver (CLARABEL first, then CVXOPT, then
SCS) hidden behind this module: downstream code relies only on the status
semantics and tolerances here, never on solver internals.  Residuals are
normalized by the magnitude of the evaluated constraint, so the default
``feas_tol`` is meaningful for badly scaled models too.  The duality gap is
estimated from complementarity of the returned primal/dual pair.

Model dump format ("SDPDUMP v1"): a line-oriented sparse-triplet text format
for cross-solver debugging.

    SDPDUMP v1
    variable <name> <symmetric|rectangular> <rows> <cols>
    objective const <value>
    objective <var> <k> <l> <value>          # coefficient of var[k, l]
    constraint <idx> <lmi|equality|scalar_ineq> <rows> <cols>
    constraint <idx> psd <var>
    c <idx> const <i> <j> <value>            # constant entry (i, j)
    c <idx> <var> <i> <j> <k> <l> <value>    # coeff of var[k, l] in entry (i, j)

Only nonzero entries are listed, in row-major order; floats use %.17g.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, SolverError

DEFAULT_FEAS_TOL = 1e-8
DEFAULT_GAP_TOL = 1e-8
AUDIT_SLACK_FACTOR = 10.0
SOLVER_CHAIN = ("CLARABEL", "CVXOPT", "SCS")
# CLARABEL terminates at the contract tolerances already; pushing it tighter
# makes it misclassify badly scaled models, so only the fallbacks get
# explicit settings.
SOLVER_OPTS = {
    "CLARABEL": {"max_iter": 500},
    "CVXOPT": {"abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-9},
    "SCS": {"eps": 1e-9, "max_iters": 100_000},
}

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_NUMERICAL_FAILURE = "numerical_failure"


class MatrixExpr:
    """Affine matrix-valued expression: constant plus linear terms in variables.

    The coefficient of variable ``v`` is a 4-D tensor ``T`` with
    ``expr[i, j] = const[i, j] + sum_kl T[i, j, k, l] * v[k, l]``.
    Supports +, -, scalar *, matmul with constant matrices, and transpose,
    which is all the designers need to assemble their LMIs.
    """

    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, shape, const=None, coeffs=None):
        self.shape = (int(shape[0]), int(shape[1]))
        self.const = np.zeros(self.shape) if const is None else np.asarray(const, dtype=float)
        if self.const.shape != self.shape:
            raise ConfigurationError(
                f"constant block has shape {self.const.shape}, expected {self.shape}")
        self.coeffs: dict[str, np.ndarray] = {} if coeffs is None else coeffs

    # -- construction -----------------------------------------------------
    @staticmethod
    def wrap(value, like_shape=None) -> "MatrixExpr":
        if isinstance(value, MatrixExpr):
            return value
        arr = np.atleast_2d(np.asarray(value, dtype=float))
        if like_shape is not None and arr.shape == (1, 1):
            arr = arr[0, 0] * np.ones(like_shape)
        return MatrixExpr(arr.shape, const=arr)

    @staticmethod
    def for_variable(name: str, shape) -> "MatrixExpr":
        r, c = shape
        T = np.zeros((r, c, r, c))
        for i in range(r):
            for j in range(c):
                T[i, j, i, j] = 1.0
        return MatrixExpr((r, c), coeffs={name: T})

    # -- algebra ----------------------------------------------------------
    def _binary_shapes(self, other):
        other = MatrixExpr.wrap(other, like_shape=self.shape)
        if other.shape != self.shape:
            raise ConfigurationError(
                f"shape mismatch: {self.shape} vs {other.shape}")
        return other

    def __add__(self, other):
        other = self._binary_shapes(other)
        coeffs = {k: v.copy() for k, v in self.coeffs.items()}
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs.get(k, 0) + v
        return MatrixExpr(self.shape, self.const + other.const, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return MatrixExpr(self.shape, -self.const,
                          {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._binary_shapes(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        s = float(scalar)
        return MatrixExpr(self.shape, s * self.const,
                          {k: s * v for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        if isinstance(other, MatrixExpr):
            if other.coeffs:
                raise ConfigurationError("product of two variable expressions is not affine")
            other = other.const
        M = np.atleast_2d(np.asarray(other, dtype=float))
        coeffs = {k: np.einsum("ijkl,js->iskl", v, M) for k, v in self.coeffs.items()}
        return MatrixExpr((self.shape[0], M.shape[1]), self.const @ M, coeffs)

    def __rmatmul__(self, other):
        M = np.atleast_2d(np.asarray(other, dtype=float))
        coeffs = {k: np.einsum("si,ijkl->sjkl", M, v) for k, v in self.coeffs.items()}
        return MatrixExpr((M.shape[0], self.shape[1]), M @ self.const, coeffs)

    @property
    def T(self) -> "MatrixExpr":
        return MatrixExpr((self.shape[1], self.shape[0]), self.const.T,
                          {k: v.transpose(1, 0, 2, 3) for k, v in self.coeffs.items()})

    # -- queries ----------------------------------------------------------
    def evaluate(self, values: dict) -> np.ndarray:
        out = self.const.copy()
        for k, T in self.coeffs.items():
            out += np.einsum("ijkl,kl->ij", T, np.asarray(values[k], dtype=float))
        return out

    def is_symmetric_valued(self, tol: float = 1e-12) -> bool:
        if self.shape[0] != self.shape[1]:
            return False
        if not np.allclose(self.const, self.const.T, atol=tol, rtol=tol):
            return False
        return all(np.allclose(T, T.transpose(1, 0, 2, 3), atol=tol, rtol=tol)
                   for T in self.coeffs.values())


def trace(expr: MatrixExpr) -> MatrixExpr:
    """Trace of a square affine expression, as a 1x1 expression."""
    if expr.shape[0] != expr.shape[1]:
        raise ConfigurationError(f"trace needs a square expression, got {expr.shape}")
    coeffs = {k: np.einsum("iikl->kl", T)[None, None, :, :]
              for k, T in expr.coeffs.items()}
    return MatrixExpr((1, 1), np.array([[np.trace(expr.const)]]), coeffs)


def block(rows) -> MatrixExpr:
    """Assemble a block matrix expression from a 2-D grid of cells.

    Cells may be MatrixExpr or array-like; shapes must tile consistently.
    """
    grid = [[MatrixExpr.wrap(cell) for cell in row] for row in rows]
    row_h = [row[0].shape[0] for row in grid]
    col_w = [cell.shape[1] for cell in grid[0]]
    for i, row in enumerate(grid):
        for j, cell in enumerate(row):
            if cell.shape != (row_h[i], col_w[j]):
                raise ConfigurationError(
                    f"block ({i},{j}) has shape {cell.shape}, expected {(row_h[i], col_w[j])}")
    R, C = sum(row_h), sum(col_w)
    const = np.zeros((R, C))
    coeffs: dict[str, np.ndarray] = {}
    r0 = 0
    for i, row in enumerate(grid):
        c0 = 0
        for j, cell in enumerate(row):
            const[r0:r0 + row_h[i], c0:c0 + col_w[j]] = cell.const
            for k, T in cell.coeffs.items():
                if k not in coeffs:
                    vr, vc = T.shape[2], T.shape[3]
                    coeffs[k] = np.zeros((R, C, vr, vc))
                coeffs[k][r0:r0 + row_h[i], c0:c0 + col_w[j]] += T
            c0 += col_w[j]
        r0 += row_h[i]
    return MatrixExpr((R, C), const, coeffs)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SdpVariable:
    name: str
    shape: tuple
    symmetric: bool


@dataclass(frozen=True)
class Constraint:
    kind: str                      # lmi | equality | scalar_ineq | psd
    expr: MatrixExpr | None = None
    var: str | None = None


class SdpModel:
    """Container for variables, one linear objective, and constraints."""

    def __init__(self):
        self.variables: dict[str, SdpVariable] = {}
        self.objective: MatrixExpr | None = None
        self.constraints: list[Constraint] = []

    def add_variable(self, name: str, rows: int, cols: int) -> MatrixExpr:
        return self._declare(name, (rows, cols), symmetric=False)

    def add_symmetric(self, name: str, dim: int) -> MatrixExpr:
        return self._declare(name, (dim, dim), symmetric=True)

    def _declare(self, name, shape, symmetric) -> MatrixExpr:
        if name in self.variables:
            raise ConfigurationError(f"variable {name!r} already declared")
        self.variables[name] = SdpVariable(name, shape, symmetric)
        return MatrixExpr.for_variable(name, shape)

    def _check_refs(self, expr: MatrixExpr):
        for name in expr.coeffs:
            if name not in self.variables:
                raise ConfigurationError(f"expression references undeclared variable {name!r}")

    def minimize(self, expr: MatrixExpr):
        self._check_refs(expr)
        if expr.shape != (1, 1):
            raise ConfigurationError("objective must be scalar (1x1)")
        self.objective = expr

    def add_lmi(self, expr: MatrixExpr):
        """Constrain the symmetric-valued affine map ``expr`` to be <= 0."""
        self._check_refs(expr)
        if not self._symmetric_valued(expr):
            raise ConfigurationError("LMI expression is not symmetric-valued")
        self.constraints.append(Constraint("lmi", expr=expr))

    def _symmetric_valued(self, expr: MatrixExpr, tol: float = 1e-9) -> bool:
        # Coefficients of symmetric variables act on symmetric inputs only,
        # so they are symmetrized over the input indices before the check.
        if expr.shape[0] != expr.shape[1]:
            return False
        if not np.allclose(expr.const, expr.const.T, atol=tol, rtol=tol):
            return False
        for name, T in expr.coeffs.items():
            if self.variables[name].symmetric:
                T = 0.5 * (T + T.transpose(0, 1, 3, 2))
            if not np.allclose(T, T.transpose(1, 0, 2, 3), atol=tol, rtol=tol):
                return False
        return True

    def add_equality(self, expr: MatrixExpr):
        self._check_refs(expr)
        self.constraints.append(Constraint("equality", expr=expr))

    def add_scalar_ineq(self, expr: MatrixExpr):
        self._check_refs(expr)
        if expr.shape != (1, 1):
            raise ConfigurationError("scalar inequality must be 1x1")
        self.constraints.append(Constraint("scalar_ineq", expr=expr))

    def add_psd(self, var_name: str):
        var = self.variables.get(var_name)
        if var is None:
            raise ConfigurationError(f"unknown variable {var_name!r}")
        if not var.symmetric:
            raise ConfigurationError("PSD requirement needs a symmetric variable")
        self.constraints.append(Constraint("psd", var=var_name))

    # -- debugging dump ----------------------------------------------------
    def dump(self) -> str:
        def fmt(v):
            return format(float(v), ".17g")

        lines = ["SDPDUMP v1"]
        for var in self.variables.values():
            kind = "symmetric" if var.symmetric else "rectangular"
            lines.append(f"variable {var.name} {kind} {var.shape[0]} {var.shape[1]}")
        if self.objective is not None:
            if self.objective.const[0, 0] != 0.0:
                lines.append(f"objective const {fmt(self.objective.const[0, 0])}")
            for name, T in sorted(self.objective.coeffs.items()):
                for k in range(T.shape[2]):
                    for l in range(T.shape[3]):
                        if T[0, 0, k, l] != 0.0:
                            lines.append(f"objective {name} {k} {l} {fmt(T[0, 0, k, l])}")
        for idx, con in enumerate(self.constraints):
            if con.kind == "psd":
                lines.append(f"constraint {idx} psd {con.var}")
                continue
            r, c = con.expr.shape
            lines.append(f"constraint {idx} {con.kind} {r} {c}")
            for i in range(r):
                for j in range(c):
                    if con.expr.const[i, j] != 0.0:
                        lines.append(f"c {idx} const {i} {j} {fmt(con.expr.const[i, j])}")
            for name, T in sorted(con.expr.coeffs.items()):
                for i in range(r):
                    for j in range(c):
                        for k in range(T.shape[2]):
                            for l in range(T.shape[3]):
                                if T[i, j, k, l] != 0.0:
                                    lines.append(
                                        f"c {idx} {name} {i} {j} {k} {l} {fmt(T[i, j, k, l])}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# solution, audit, solve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    """Normalized residual per constraint (same order as the model)."""

    residuals: tuple
    max_residual: float
    passed: bool


@dataclass(frozen=True)
class SdpSolution:
    status: str
    values: dict = field(default_factory=dict)
    objective: float = float("nan")
    residuals: ResidualReport | None = None
    duality_gap: float = float("nan")
    solver_name: str = ""


def _normalized_residual(con: Constraint, values: dict) -> float:
    if con.kind == "psd":
        val = np.asarray(values[con.var], dtype=float)
        lam = np.linalg.eigvalsh(0.5 * (val + val.T)).min()
        return max(0.0, -lam) / (1.0 + np.linalg.norm(val, 2))
    val = con.expr.evaluate(values)
    scale = 1.0 + np.linalg.norm(val, 2) + np.linalg.norm(con.expr.const, 2)
    if con.kind == "lmi":
        lam = np.linalg.eigvalsh(0.5 * (val + val.T)).max()
        return max(0.0, lam) / scale
    if con.kind == "equality":
        return float(np.abs(val).max()) / scale
    return max(0.0, float(val[0, 0])) / scale  # scalar_ineq


def audit(model: SdpModel, solution: SdpSolution,
          feas_tol: float = DEFAULT_FEAS_TOL) -> ResidualReport:
    """Residual report for a solved point; passes within ``feas_tol * 10``."""
    if not solution.values:
        raise ConfigurationError("solution carries no variable values")
    res = tuple(_normalized_residual(con, solution.values)
                for con in model.constraints)
    max_res = max(res) if res else 0.0
    return ResidualReport(residuals=res, max_residual=max_res,
                          passed=max_res <= AUDIT_SLACK_FACTOR * feas_tol)


def _compile_cvxpy(model: SdpModel):
    import cvxpy as cp

    cvars = {}
    for var in model.variables.values():
        if var.symmetric:
            cvars[var.name] = cp.Variable(var.shape, name=var.name, symmetric=True)
        else:
            cvars[var.name] = cp.Variable(var.shape, name=var.name)

    def to_cp(expr: MatrixExpr):
        r, c = expr.shape
        e = cp.Constant(expr.const)
        for name, T in expr.coeffs.items():
            vr, vc = T.shape[2], T.shape[3]
            Aop = T.transpose(1, 0, 3, 2).reshape(r * c, vr * vc)
            e = e + cp.reshape(Aop @ cp.vec(cvars[name], order="F"), (r, c), order="F")
        return e

    cons = []
    for con in model.constraints:
        if con.kind == "lmi":
            e = to_cp(con.expr)
            cons.append(0.5 * (e + e.T) << 0)
        elif con.kind == "equality":
            cons.append(to_cp(con.expr) == 0)
        elif con.kind == "scalar_ineq":
            cons.append(cp.sum(to_cp(con.expr)) <= 0)
        else:
            cons.append(cvars[con.var] >> 0)
    objective = cp.Minimize(cp.sum(to_cp(model.objective)))
    return cp.Problem(objective, cons), cvars, cons


def _duality_gap(model: SdpModel, cons, objective: float) -> tuple[float, float]:
    """Absolute and scaled gap between the objective and the dual objective.

    The dual objective is assembled from the constraint constants and the
    returned multipliers (Lagrangian value at the dual point), which stays
    well scaled even when duals are large on degenerate problems.
    """
    dobj = float(model.objective.const[0, 0])
    for con, cp_con in zip(model.constraints, cons):
        if con.kind == "psd":
            continue  # no constant term
        dual = cp_con.dual_value
        if dual is None:
            return float("nan"), float("nan")
        dual = np.asarray(dual, dtype=float).reshape(con.expr.const.shape)
        dobj += float(np.sum(dual * con.expr.const))
    gap = abs(objective - dobj)
    return gap, gap / (1.0 + abs(objective) + abs(dobj))


def solve(model: SdpModel, feas_tol: float = DEFAULT_FEAS_TOL,
          gap_tol: float = DEFAULT_GAP_TOL, solvers=None) -> SdpSolution:
    """Solve the model; status ``optimal`` certifies audited residuals and gap.

    Backends are tried in a fixed order, so identical models produce
    identical solutions.  ``infeasible`` and ``unbounded`` are passed through
    from the backend; anything else that fails the audit becomes
    ``numerical_failure``.
    """
    import cvxpy as cp

    if model.objective is None:
        raise ConfigurationError("model has no objective")
    problem, cvars, cons = _compile_cvxpy(model)
    chain = list(solvers) if solvers is not None else [
        s for s in SOLVER_CHAIN if s in cp.installed_solvers()]
    if not chain:
        raise SolverError("no SDP backend available")

    strong = None            # exact infeasible/unbounded verdict
    weak = None              # *_inaccurate verdict, least trustworthy
    attempt = None           # best values-bearing point that failed the audit
    for name in chain:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                problem.solve(solver=name, verbose=False,
                              **SOLVER_OPTS.get(name, {}))
        except (cp.SolverError, ValueError, ZeroDivisionError):
            continue
        status = problem.status or ""
        if status.startswith("infeasible") or status.startswith("unbounded"):
            # trusted only if no later backend certifies an optimal point
            verdict = STATUS_INFEASIBLE if status.startswith("infeasible") \
                else STATUS_UNBOUNDED
            sol = SdpSolution(status=verdict, solver_name=name)
            if status in ("infeasible", "unbounded"):
                strong = strong or sol
            else:
                weak = weak or sol
            continue
        if not status.startswith("optimal") or any(
                cvars[v].value is None for v in model.variables):
            continue
        values = {}
        for v, var in model.variables.items():
            val = np.atleast_2d(np.asarray(cvars[v].value, dtype=float))
            if var.symmetric:
                val = 0.5 * (val + val.T)
            values[v] = val
        objective = float(model.objective.evaluate(values)[0, 0])
        gap, rel_gap = _duality_gap(model, cons, objective)
        sol = SdpSolution(status=STATUS_NUMERICAL_FAILURE, values=values,
                          objective=objective, duality_gap=gap, solver_name=name)
        report = audit(model, sol, feas_tol=feas_tol)
        if report.max_residual <= feas_tol and rel_gap <= gap_tol:
            return SdpSolution(status=STATUS_OPTIMAL, values=values,
                               objective=objective, residuals=report,
                               duality_gap=gap, solver_name=name)
        if attempt is None or report.max_residual < attempt.residuals.max_residual:
            attempt = SdpSolution(status=STATUS_NUMERICAL_FAILURE, values=values,
                                  objective=objective, residuals=report,
                                  duality_gap=gap, solver_name=name)
    for sol in (strong, attempt, weak):
        if sol is not None:
            return sol
    return SdpSolution(status=STATUS_NUMERICAL_FAILURE)
