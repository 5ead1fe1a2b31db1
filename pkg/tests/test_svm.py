import numpy as np
import pytest

from bloomsight.svm import (SvmModel, dual_objective, rbf_kernel, smo_solve,
                            squared_distances, svm_decision, svm_train)

from oracles import qp_svm_dual, svm_dual_objective

XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([1.0, 1.0, -1.0, -1.0])


def kernel_sum_oracle(model, x):
    total = 0.0
    for sv, coef in zip(model.support_vectors, model.dual_coef):
        total += coef * np.exp(-model.gamma * np.sum((sv - x) ** 2))
    return total + model.bias


class TestKernel:
    def test_squared_distances(self):
        A = np.array([[0.0, 0.0], [1.0, 2.0]])
        B = np.array([[3.0, 4.0]])
        assert np.allclose(squared_distances(A, B), [[25.0], [8.0]])

    def test_rbf_diagonal_is_one(self):
        rng = np.random.default_rng(2)
        X = rng.normal(0, 1, (5, 3))
        K = rbf_kernel(X, X, 0.7)
        assert np.allclose(np.diag(K), 1.0)
        assert np.allclose(K, K.T)


class TestTwoPointSymmetry:
    def test_alphas_equal_and_midpoint_zero(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([-1.0, 1.0])
        model = svm_train(X, y, C=10.0, gamma=1.0)
        alphas = np.abs(model.dual_coef)
        assert alphas[0] == pytest.approx(alphas[1], rel=1e-9)
        preds = np.sign(svm_decision(model, X))
        assert np.array_equal(preds, y)
        assert svm_decision(model, np.array([0.5])) == pytest.approx(0.0, abs=1e-9)


class TestXor:
    def test_perfect_training_accuracy(self):
        model = svm_train(XOR_X, XOR_Y, C=10.0, gamma=0.5)
        assert np.array_equal(np.sign(svm_decision(model, XOR_X)), XOR_Y)

    def test_objective_matches_qp_oracle(self):
        K = rbf_kernel(XOR_X, XOR_X, 0.5)
        alpha, bias, _, gap, converged = smo_solve(K, XOR_Y, 10.0, tol=1e-6)
        assert converged
        _, oracle_obj = qp_svm_dual(K, XOR_Y, 10.0)
        smo_obj = svm_dual_objective(K, XOR_Y, alpha)
        assert smo_obj == pytest.approx(oracle_obj, rel=1e-4, abs=1e-8)


class TestContradictoryPoints:
    def test_duplicate_points_opposite_labels(self):
        X = np.array([[1.0, 2.0], [1.0, 2.0]])
        y = np.array([1.0, -1.0])
        C = 7.0
        model = svm_train(X, y, C=C, gamma=1.0)
        # the 2-variable dual pushes both multipliers to the C bound
        assert np.allclose(np.abs(model.dual_coef), C, atol=1e-9)
        correct = np.sign(svm_decision(model, X)) == y
        assert correct.sum() <= 1


class TestRandomInstancesAgainstOracle:
    def test_dual_objective_and_kkt(self):
        rng = np.random.default_rng(101)
        for trial in range(30):
            n = int(rng.integers(4, 31))
            dim = int(rng.integers(1, 4))
            X = rng.normal(0, 1, (n, dim))
            y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
            if np.all(y > 0) or np.all(y < 0):
                y[0] *= -1
            C = float(rng.choice([1.0, 10.0]))
            gamma = float(rng.choice([0.5, 2.0]))
            K = rbf_kernel(X, X, gamma)
            alpha, bias, _, gap, converged = smo_solve(K, y, C, tol=1e-6)
            assert converged
            assert alpha.min() >= -1e-12 and alpha.max() <= C + 1e-12
            assert abs(alpha @ y) <= 1e-6
            _, oracle_obj = qp_svm_dual(K, y, C)
            smo_obj = svm_dual_objective(K, y, alpha)
            assert smo_obj <= oracle_obj + 1e-4 * max(1.0, abs(oracle_obj))
            assert smo_obj == pytest.approx(oracle_obj, rel=1e-4, abs=1e-6)


class TestModelContracts:
    def setup_method(self):
        rng = np.random.default_rng(7)
        self.X = np.concatenate([rng.normal(-1, 0.4, (15, 2)), rng.normal(1, 0.4, (15, 2))])
        self.y = np.concatenate([-np.ones(15), np.ones(15)])
        self.model = svm_train(self.X, self.y, C=5.0, gamma=0.8, tol=1e-4)

    def test_kkt_invariants(self):
        alpha = np.abs(self.model.dual_coef)
        assert alpha.min() > 0  # stored vectors are support vectors
        assert alpha.max() <= 5.0 + 1e-12
        signs = np.sign(self.model.dual_coef)
        assert abs((alpha * signs).sum()) <= 1e-6

    def test_free_support_vectors_sit_on_margin(self):
        alpha = np.abs(self.model.dual_coef)
        free = (alpha > 1e-8) & (alpha < 5.0 - 1e-8)
        if free.any():
            scores = svm_decision(self.model, self.model.support_vectors[free])
            labels = np.sign(self.model.dual_coef[free])
            assert np.abs(scores - labels).max() <= 1e-4 + 1e-9

    def test_decision_matches_kernel_sum_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            x = rng.normal(0, 1, 2)
            assert svm_decision(self.model, x) == pytest.approx(kernel_sum_oracle(self.model, x),
                                                                abs=1e-9)

    def test_determinism(self):
        again = svm_train(self.X, self.y, C=5.0, gamma=0.8, tol=1e-4)
        assert np.array_equal(again.support_vectors, self.model.support_vectors)
        assert np.array_equal(again.dual_coef, self.model.dual_coef)
        assert again.bias == self.model.bias

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            svm_train(self.X, np.ones(len(self.X)), C=1.0, gamma=1.0)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            svm_decision(self.model, np.zeros(3))

    def test_nonconvergence_reported(self):
        model = svm_train(self.X, self.y, C=5.0, gamma=0.8, tol=1e-12, max_iter=3)
        assert not model.converged
        assert model.kkt_gap > 0
        assert model.iterations == 3

    def test_dual_objective_helper(self):
        K = rbf_kernel(self.X, self.X, 0.8)
        alpha, *_ = smo_solve(K, self.y, 5.0)
        assert dual_objective(K, self.y, alpha) == pytest.approx(
            svm_dual_objective(K, self.y, alpha), abs=1e-12)
