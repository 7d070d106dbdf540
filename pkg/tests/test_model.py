import numpy as np
import pytest

from covertlqr import (ConfigurationError, DesignWeights, LinearSystem,
                       check_controllability, check_observability, validate)
from covertlqr.model import is_pd, is_psd

from conftest import random_controllable


def make_weights(**overrides):
    base = dict(Q=0.2 * np.eye(2), R=[[1.0]], V=np.eye(2),
                lam=0.1, epsilon=1e-4, delta=1e-3)
    base.update(overrides)
    return DesignWeights(**base)


class TestLinearSystem:
    def test_dimensions(self, double_integrator):
        assert double_integrator.n == 2
        assert double_integrator.m == 1
        assert double_integrator.p == 1

    def test_rejects_nonsquare_A(self):
        with pytest.raises(ConfigurationError, match="square"):
            LinearSystem(A=[[0, 1, 0], [0, 0, 1]], B=[[1], [1]], C=[[1, 0]])

    def test_rejects_mismatched_B(self):
        with pytest.raises(ConfigurationError, match="B"):
            LinearSystem(A=np.eye(2), B=[[1], [1], [1]], C=[[1, 0]])

    def test_rejects_mismatched_C(self):
        with pytest.raises(ConfigurationError, match="C"):
            LinearSystem(A=np.eye(2), B=[[1], [1]], C=[[1, 0, 0]])

    def test_matrices_are_immutable(self, double_integrator):
        with pytest.raises(ValueError):
            double_integrator.A[0, 0] = 5.0


class TestControllability:
    def test_double_integrator_controllable(self, double_integrator):
        assert check_controllability(double_integrator)

    def test_eigen_aligned_input_uncontrollable(self):
        sys_ = LinearSystem(A=np.eye(2), B=[[1.0], [0.0]], C=[[1.0, 0.0]])
        assert not check_controllability(sys_)

    def test_full_input_authority(self):
        rng = np.random.default_rng(3)
        sys_ = LinearSystem(A=rng.standard_normal((4, 4)), B=np.eye(4),
                            C=np.eye(4))
        assert check_controllability(sys_)

    def test_invariant_under_input_coordinate_change(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            A, B = random_controllable(rng, 4, 2)
            T = rng.standard_normal((2, 2))
            while abs(np.linalg.det(T)) < 1e-3:
                T = rng.standard_normal((2, 2))
            before = check_controllability(LinearSystem(A, B, np.eye(4)))
            after = check_controllability(LinearSystem(A, B @ T, np.eye(4)))
            assert before == after


class TestObservability:
    def test_position_output_observable(self):
        assert check_observability(np.array([[0.0, 1.0], [0.0, 0.0]]),
                                   np.array([[1.0, 0.0]]))

    def test_velocity_output_unobservable(self):
        assert not check_observability(np.array([[0.0, 1.0], [0.0, 0.0]]),
                                       np.array([[0.0, 1.0]]))

    def test_full_rank_output(self):
        assert check_observability(-np.eye(2), np.eye(2))

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            check_observability(np.eye(2), np.eye(3))


class TestValidate:
    def test_benchmark_config_valid(self, double_integrator):
        report = validate(double_integrator, make_weights())
        assert report.ok and report.issues == ()

    def test_zero_R_rejected(self, double_integrator):
        report = validate(double_integrator, make_weights(R=[[0.0]]))
        assert not report.ok
        assert any("R not positive definite" in s for s in report.issues)

    def test_negative_lambda_rejected(self, double_integrator):
        report = validate(double_integrator, make_weights(lam=-1.0))
        assert any("lambda negative" in s for s in report.issues)

    def test_epsilon_delta_positive(self, double_integrator):
        report = validate(double_integrator, make_weights(epsilon=0.0, delta=-1.0))
        issues = " ".join(report.issues)
        assert "epsilon" in issues and "delta" in issues

    def test_shape_mismatch_reported_with_field(self, double_integrator):
        report = validate(double_integrator, make_weights(Q=np.eye(3)))
        assert any(s.startswith("Q has shape") for s in report.issues)

    def test_uncontrollable_pair_reported(self):
        sys_ = LinearSystem(A=np.eye(2), B=[[1.0], [0.0]], C=[[1.0, 0.0]])
        report = validate(sys_, make_weights())
        assert any("not controllable" in s for s in report.issues)

    def test_raise_if_invalid(self, double_integrator):
        with pytest.raises(ConfigurationError, match="lambda negative"):
            validate(double_integrator, make_weights(lam=-1.0)).raise_if_invalid()

    def test_valid_config_supports_downstream(self, double_integrator):
        # the type invariants are exactly the designers' preconditions
        from covertlqr import observability_gramian, solve_care
        w = make_weights()
        assert validate(double_integrator, w).ok
        P, K = solve_care(double_integrator.A, double_integrator.B, w.Q, w.R)
        observability_gramian(double_integrator, K, w.epsilon)


class TestDefiniteness:
    def test_symmetrizes_rounding_noise(self):
        M = np.eye(3)
        M[0, 1] += 1e-14
        assert is_pd(M) and is_psd(M)

    def test_semidefinite_is_not_pd(self):
        assert is_psd(np.diag([1.0, 0.0]))
        assert not is_pd(np.diag([1.0, 0.0]))
