import numpy as np
import pytest

from bloomsight.pca import (PcaModel, pca_fit, pca_project, pca_reconstruct,
                            variance_ratio)

from oracles import jacobi_eigh


def sign_fix(v):
    pivot = np.argmax(np.abs(v))
    return v if v[pivot] >= 0 else -v


class TestPcaFit:
    def test_collinear_points(self):
        t = np.linspace(-2, 2, 9)
        X = np.stack([3 * t, 4 * t], axis=1)  # points on a line
        model = pca_fit(X, 1)
        assert variance_ratio(model, 1) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(np.abs(model.components[0]), [0.6, 0.8], atol=1e-12)

    def test_isotropic_cross(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        model = pca_fit(X, 2)
        # covariance is (2/3) * identity
        assert np.allclose(model.eigenvalues, [2 / 3, 2 / 3], atol=1e-12)
        assert variance_ratio(model, 1) == pytest.approx(0.5, abs=1e-12)

    def test_matches_jacobi_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(4, 30))
            dim = int(rng.integers(2, 8))
            X = rng.normal(0, 1, (n, dim)) * rng.uniform(0.5, 3, dim)
            model = pca_fit(X, min(dim, n - 1))
            centered = X - X.mean(axis=0)
            cov = centered.T @ centered / (n - 1)
            vals, vecs = jacobi_eigh(cov)
            assert np.allclose(model.eigenvalues, vals, atol=1e-8)
            for i, comp in enumerate(model.components):
                oracle = sign_fix(vecs[:, i])
                assert min(np.abs(comp - oracle).max(), np.abs(comp + oracle).max()) <= 1e-8

    def test_orthonormality(self):
        rng = np.random.default_rng(23)
        X = rng.normal(0, 1, (40, 6))
        model = pca_fit(X, 6)
        gram = model.components @ model.components.T
        assert np.abs(gram - np.eye(6)).max() <= 1e-8

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(29)
        X = rng.normal(0, 1, (25, 4))
        a = pca_fit(X, 4)
        b = pca_fit(X.copy(), 4)
        assert np.array_equal(a.components, b.components)
        for row in a.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_zero_variance_flagged(self):
        X = np.tile([1.0, 2.0, 3.0], (5, 1))
        model = pca_fit(X, 2)
        assert model.degenerate
        assert np.allclose(model.eigenvalues, 0.0)
        assert variance_ratio(model, 1) == 1.0

    def test_k_too_large_rejected(self):
        X = np.random.default_rng(0).normal(0, 1, (3, 5))
        with pytest.raises(ValueError):
            pca_fit(X, 3)  # k must be <= n_samples - 1 = 2
        with pytest.raises(ValueError):
            pca_fit(X[:1], 1)


class TestProject:
    def setup_method(self):
        rng = np.random.default_rng(31)
        self.X = rng.normal(0, 2, (30, 5))
        self.model = pca_fit(self.X, 3)

    def test_mean_projects_to_zero(self):
        assert np.allclose(pca_project(self.model, self.model.mean), 0.0, atol=1e-12)

    def test_component_projects_to_unit_vector(self):
        f = self.model.mean + self.model.components[0]
        assert np.allclose(pca_project(self.model, f), [1.0, 0.0, 0.0], atol=1e-10)

    def test_reconstruction_error_non_increasing_in_k(self):
        rng = np.random.default_rng(37)
        X = rng.normal(0, 1, (25, 6)) * np.arange(1, 7)
        errors = []
        for k in range(1, 7):
            model = pca_fit(X, k)
            rec = pca_reconstruct(model, pca_project(model, X))
            errors.append(np.sum((rec - X) ** 2))
        assert all(errors[i + 1] <= errors[i] + 1e-9 for i in range(5))

    def test_truncation_oracle(self):
        # the k-term reconstruction beats dropping a kept component in favor
        # of a weaker one from the same fitted family
        rng = np.random.default_rng(41)
        X = rng.normal(0, 1, (40, 5)) * np.array([3.0, 2.0, 1.5, 1.0, 0.5])
        full = pca_fit(X, 5)
        k = 3
        best = pca_fit(X, k)
        rec_best = pca_reconstruct(best, pca_project(best, X))
        err_best = np.sum((rec_best - X) ** 2)
        for drop in range(k):
            keep = [i for i in range(k) if i != drop] + [k]  # swap in component k
            C = full.components[keep]
            proj = (X - full.mean) @ C.T
            rec = proj @ C + full.mean
            assert err_best <= np.sum((rec - X) ** 2) + 1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pca_project(self.model, np.zeros(4))
        with pytest.raises(ValueError):
            pca_reconstruct(self.model, np.zeros(5))

    def test_fit_order_invariance(self):
        rng = np.random.default_rng(43)
        perm = rng.permutation(len(self.X))
        shuffled = pca_fit(self.X[perm], 3)
        f = rng.normal(0, 1, 5)
        assert np.allclose(pca_project(self.model, f), pca_project(shuffled, f), atol=1e-9)


class TestVarianceRatio:
    def test_full_rank_reaches_one(self):
        rng = np.random.default_rng(47)
        model = pca_fit(rng.normal(0, 1, (20, 4)), 4)
        assert variance_ratio(model, 4) == pytest.approx(1.0, abs=1e-12)

    def test_non_decreasing(self):
        rng = np.random.default_rng(53)
        model = pca_fit(rng.normal(0, 1, (20, 6)), 6)
        ratios = [variance_ratio(model, k) for k in range(1, 7)]
        assert all(b >= a for a, b in zip(ratios, ratios[1:]))

    def test_out_of_range(self):
        rng = np.random.default_rng(59)
        model = pca_fit(rng.normal(0, 1, (10, 3)), 2)
        with pytest.raises(ValueError):
            variance_ratio(model, 0)
        with pytest.raises(ValueError):
            variance_ratio(model, 4)
