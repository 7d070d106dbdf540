import math

import numpy as np
import pytest

from covertlqr import (DesignWeights, LinearSystem, UnstableMatrixError,
                       certify_design, eigen_report, gramian_quadrature,
                       metric_j_o1, metric_j_o2, observability_gramian,
                       performance_cost, solve_care, solve_lyapunov_obs)

from conftest import random_hurwitz

SQRT2 = math.sqrt(2.0)


class TestPerformanceCost:
    def test_scalar_optimal_cost(self, scalar_system):
        # at the optimal gain the cost certificate is the Riccati solution
        _, K = solve_care([[1.0]], [[1.0]], [[1.0]], [[1.0]])
        J_s, P = performance_cost(scalar_system, K, [[1.0]], [[1.0]], [[1.0]])
        assert J_s == pytest.approx(1.0 + SQRT2, abs=1e-9)

    def test_benchmark_zero_slack_at_optimum(self, double_integrator):
        Q, R, V = 0.2 * np.eye(2), np.eye(1), np.eye(2)
        P_star, K_star = solve_care(double_integrator.A, double_integrator.B, Q, R)
        J_s, P = performance_cost(double_integrator, K_star, Q, R, V)
        assert J_s == pytest.approx(float(np.trace(P_star @ V)), rel=1e-10)

    def test_binding_budget_gain(self, scalar_system):
        # k = -5.3708 exhausts a unit budget over the optimum
        J_s, P = performance_cost(scalar_system, [[-5.3708]], [[1.0]], [[1.0]], [[1.0]])
        assert P[0, 0] == pytest.approx(1.0 + SQRT2 + 1.0, abs=1e-3)

    def test_unstable_gain_rejected(self, scalar_system):
        with pytest.raises(UnstableMatrixError, match="unstable gain"):
            performance_cost(scalar_system, [[0.0]], [[1.0]], [[1.0]], [[1.0]])


class TestObservabilityGramian:
    def test_scalar_hand_value(self, scalar_system):
        K = np.array([[-1.0 - SQRT2]])  # closed loop at -sqrt(2)
        W = observability_gramian(scalar_system, K, 0.0)
        assert W[0, 0] == pytest.approx(1.0 / (2.0 * SQRT2), abs=1e-12)

    def test_zero_sensing_zero_gramian(self):
        sys_ = LinearSystem(A=[[0.0, 1.0], [0.0, 0.0]], B=[[1.0], [1.0]],
                            C=[[0.0, 0.0]])
        _, K = solve_care(sys_.A, sys_.B, np.eye(2), np.eye(1))
        W = observability_gramian(sys_, K, 0.0)
        np.testing.assert_allclose(W, 0.0, atol=1e-12)

    def test_regularization_is_linear(self, double_integrator):
        _, K = solve_care(double_integrator.A, double_integrator.B,
                          0.2 * np.eye(2), np.eye(1))
        A_cl = double_integrator.A + double_integrator.B @ K
        eps = 1e-4
        W0 = observability_gramian(double_integrator, K, 0.0)
        W_eps = observability_gramian(double_integrator, K, eps)
        expected = eps * solve_lyapunov_obs(A_cl, np.eye(2))
        np.testing.assert_allclose(W_eps - W0, expected, atol=1e-11)

    def test_regularized_gramian_dominates(self, double_integrator):
        _, K = solve_care(double_integrator.A, double_integrator.B,
                          0.2 * np.eye(2), np.eye(1))
        W0 = observability_gramian(double_integrator, K, 0.0)
        W_eps = observability_gramian(double_integrator, K, 1e-4)
        assert np.linalg.eigvalsh(W_eps - W0).min() >= -1e-12


class TestMetrics:
    def test_identity_values(self):
        assert metric_j_o1(np.eye(3), np.eye(3)) == pytest.approx(3.0)
        assert metric_j_o2(np.eye(3), np.eye(3)) == pytest.approx(-3.0)

    def test_singular_gramian_unbounded(self):
        assert metric_j_o2(np.diag([2.0, 1e-15]), np.eye(2)) == -math.inf

    def test_trace_inequality_on_random_pairs(self):
        # tr(W^-1 V^-1) >= n^2 / tr(W V) for PD W, V
        rng = np.random.default_rng(17)
        n = 4
        for _ in range(100):
            W = random_hurwitz(rng, n)
            W = W @ W.T + 0.1 * np.eye(n)
            V = random_hurwitz(rng, n)
            V = V @ V.T + 0.1 * np.eye(n)
            lhs = -metric_j_o2(W, V)
            rhs = n * n / metric_j_o1(W, V)
            assert lhs >= rhs * (1.0 - 1e-12)

    def test_regularized_metric_always_finite(self):
        # even a closed loop that is unobservable through C
        sys_ = LinearSystem(A=[[0.0, 1.0], [0.0, 0.0]], B=[[1.0], [1.0]],
                            C=[[0.0, 0.0]])
        _, K = solve_care(sys_.A, sys_.B, np.eye(2), np.eye(1))
        W_eps = observability_gramian(sys_, K, 1e-4)
        assert math.isfinite(metric_j_o2(W_eps, np.eye(2)))


class TestQuadratureOracle:
    def test_identity_case(self):
        np.testing.assert_allclose(gramian_quadrature(-np.eye(2), 2.0 * np.eye(2)),
                                   np.eye(2), atol=1e-7)

    def test_scalar_case(self):
        W = gramian_quadrature(np.array([[-1.0]]), np.array([[1.0]]))
        assert W[0, 0] == pytest.approx(0.5, abs=1e-8)

    def test_rejects_unstable(self):
        with pytest.raises(UnstableMatrixError):
            gramian_quadrature(np.eye(2), np.eye(2))

    def test_energy_identity(self):
        # tr(W V) is the expected output energy for x0 ~ N(0, V)
        rng = np.random.default_rng(23)
        for _ in range(100):
            A = random_hurwitz(rng, 3)
            C = rng.standard_normal((2, 3))
            V = random_hurwitz(rng, 3)
            V = V @ V.T + 0.2 * np.eye(3)
            W = solve_lyapunov_obs(A, C.T @ C)
            energy = float(np.trace(gramian_quadrature(A, C.T @ C) @ V))
            assert energy == pytest.approx(float(np.trace(W @ V)), rel=1e-5)


class TestEigenReport:
    def test_diagonal_case(self):
        rep = eigen_report(np.diag([1.0, 4.0]))
        np.testing.assert_allclose(rep.eigenvalues, [4.0, 1.0])
        assert rep.trace_W == pytest.approx(5.0)
        assert rep.trace_W_inv == pytest.approx(1.25)

    def test_singular_marks_unbounded(self):
        rep = eigen_report(np.diag([1.0, 0.0]))
        assert rep.trace_W_inv == math.inf

    def test_trace_matches_eigen_sum(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            W = random_hurwitz(rng, 5)
            W = W @ W.T
            rep = eigen_report(W)
            assert rep.trace_W == pytest.approx(float(np.trace(W)), rel=1e-8)
            assert np.all(np.diff(rep.eigenvalues) <= 0)


class TestCertifyDesign:
    def test_full_budget_slack_at_optimum(self, double_integrator, di_weights):
        w = di_weights(lam=0.25)
        _, K_star = solve_care(double_integrator.A, double_integrator.B, w.Q, w.R)
        design = certify_design(double_integrator, w, K_star)
        assert design.performance_slack == pytest.approx(0.25, abs=1e-9)
        assert design.J_o1 == pytest.approx(metric_j_o1(design.W, w.V))

    def test_lyapunov_certificate_residual(self, double_integrator, di_weights):
        w = di_weights()
        _, K_star = solve_care(double_integrator.A, double_integrator.B, w.Q, w.R)
        d = certify_design(double_integrator, w, K_star)
        A_cl = double_integrator.A + double_integrator.B @ d.K
        res = np.linalg.norm(A_cl.T @ d.P + d.P @ A_cl + w.Q + d.K.T @ w.R @ d.K, 2)
        assert res <= 1e-8 * (1.0 + np.linalg.norm(d.P, 2))
