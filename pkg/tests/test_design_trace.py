import numpy as np
import pytest

from covertlqr import (DesignWeights, LinearSystem, RecoveryError,
                       is_hurwitz, solve_care, solve_lyapunov_ctrl,
                       solve_lyapunov_obs, solve_problem1)
from covertlqr.design_trace import (Problem1Variables, build_problem1_sdp,
                                    recover_and_audit)
from covertlqr.exceptions import ConfigurationError

from _oracles import scalar_p1_oracle


class TestModelShape:
    def test_variable_count(self, double_integrator, di_weights):
        w = di_weights()
        P_star, _ = solve_care(double_integrator.A, double_integrator.B, w.Q, w.R)
        model = build_problem1_sdp(double_integrator, w, P_star)
        shapes = {name: var.shape for name, var in model.variables.items()}
        assert shapes == {"X": (1, 2), "S": (2, 2), "Z": (1, 1)}
        # free scalar unknowns: X has 2, symmetric S has 3, symmetric Z has 1
        free = sum(r * c if not v.symmetric else r * (r + 1) // 2
                   for (r, c), v in ((var.shape, var) for var in model.variables.values()))
        assert free == 6
        kinds = sorted(c.kind for c in model.constraints)
        assert kinds == ["equality", "lmi", "psd", "psd", "scalar_ineq"]

    def test_benchmark_feasible_at_small_budget(self, double_integrator, di_weights):
        design = solve_problem1(double_integrator, di_weights(lam=0.1))
        ok, _ = is_hurwitz(double_integrator.A + double_integrator.B @ design.K)
        assert ok


class TestSolveProblem1:
    def test_zero_budget_recovers_lqr(self, double_integrator, di_weights):
        w = di_weights(lam=0.0)
        _, K_star = solve_care(double_integrator.A, double_integrator.B, w.Q, w.R)
        design = solve_problem1(double_integrator, w)
        assert np.abs(design.K - K_star).max() < 1e-4
        A_cl = double_integrator.A + double_integrator.B @ K_star
        w_zero = solve_lyapunov_obs(A_cl, double_integrator.C.T @ double_integrator.C)
        assert design.J_o1 == pytest.approx(float(np.trace(w_zero @ w.V)), abs=1e-5)

    def test_scalar_benchmark_values(self, scalar_system, scalar_weights):
        design = solve_problem1(scalar_system, scalar_weights)
        assert design.K[0, 0] == pytest.approx(-5.3708, abs=1e-3)
        assert design.J_o1 == pytest.approx(0.1144, abs=1e-3)

    def test_scalar_oracle_family(self):
        rng = np.random.default_rng(77)
        for trial in range(5):
            a = rng.uniform(-1.0, 2.0)
            b = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
            c = rng.uniform(0.2, 2.0)
            q = rng.uniform(0.1, 2.0)
            r = rng.uniform(0.1, 2.0)
            v = rng.uniform(0.2, 2.0)
            lam = [0.1, 1.0, 10.0][trial % 3]
            sys_ = LinearSystem(A=[[a]], B=[[b]], C=[[c]])
            w = DesignWeights(Q=[[q]], R=[[r]], V=[[v]], lam=lam,
                              epsilon=1e-4, delta=1e-3)
            design = solve_problem1(sys_, w)
            k_ref, j1_ref = scalar_p1_oracle(a, b, c, q, r, v, lam)
            assert design.J_o1 == pytest.approx(j1_ref, rel=1e-3)
            assert design.K[0, 0] == pytest.approx(k_ref, rel=1e-3)

    def test_budget_binds_on_scalar_family(self, scalar_system, scalar_weights):
        design = solve_problem1(scalar_system, scalar_weights)
        # the visibility always improves with more budget, so the audit slack
        # vanishes at the optimum
        assert abs(design.performance_slack) <= 1e-4

    def test_objective_nonincreasing_in_budget(self, double_integrator, di_weights):
        values = [solve_problem1(double_integrator, di_weights(lam=lam)).J_o1
                  for lam in (0.01, 0.05, 0.1, 0.5, 1.0)]
        assert all(b <= a + 1e-6 for a, b in zip(values, values[1:]))

    def test_rejects_invalid_config(self, double_integrator, di_weights):
        bad = DesignWeights(Q=0.2 * np.eye(2), R=[[0.0]], V=np.eye(2),
                            lam=0.1, epsilon=1e-4, delta=1e-3)
        with pytest.raises(ConfigurationError, match="R not positive definite"):
            solve_problem1(double_integrator, bad)


class TestRecoverAndAudit:
    def test_matches_direct_solve(self, double_integrator, di_weights):
        from covertlqr import sdp
        w = di_weights(lam=0.1)
        P_star, _ = solve_care(double_integrator.A, double_integrator.B, w.Q, w.R)
        model = build_problem1_sdp(double_integrator, w, P_star)
        sol = sdp.solve(model)
        vars_ = Problem1Variables(X=sol.values["X"], S=sol.values["S"],
                                  Z=sol.values["Z"])
        design = recover_and_audit(vars_, double_integrator, w, P_star,
                                   sdp_objective=sol.objective)
        assert design.performance_slack >= -1e-6
        assert design.J_o1 == pytest.approx(sol.objective, rel=1e-6)
        S_check = solve_lyapunov_ctrl(
            double_integrator.A + double_integrator.B @ design.K, w.V)
        assert np.linalg.norm(S_check - sol.values["S"], 2) <= \
            1e-6 * (1.0 + np.linalg.norm(S_check, 2))

    def test_singular_S_raises_recovery_failure(self, double_integrator, di_weights):
        w = di_weights()
        P_star, _ = solve_care(double_integrator.A, double_integrator.B, w.Q, w.R)
        vars_ = Problem1Variables(X=np.array([[0.0, 0.0]]),
                                  S=np.zeros((2, 2)), Z=np.zeros((1, 1)))
        with pytest.raises(RecoveryError, match="recovery failure"):
            recover_and_audit(vars_, double_integrator, w, P_star)
