"""Random hidden layer and kernel matrix behavior."""

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from rail.errors import DimensionMismatch
from rail.projection import (
    IdentityProjection,
    KernelSpec,
    RhlParams,
    kernel_matrix,
    rhl_project,
)


class TestRhl:
    def test_weight_is_pure_function_of_seed(self):
        a = RhlParams(seed=3, input_dim=8, output_dim=32)
        b = RhlParams(seed=3, input_dim=8, output_dim=32)
        np.testing.assert_array_equal(a.weight, b.weight)
        c = RhlParams(seed=4, input_dim=8, output_dim=32)
        assert not np.array_equal(a.weight, c.weight)

    def test_weight_scale(self):
        """Entries are N(0, 1/input_dim), so columns have near-unit norm."""
        p = RhlParams(seed=0, input_dim=400, output_dim=200)
        col_norms = np.linalg.norm(p.weight, axis=0)
        assert abs(col_norms.mean() - 1.0) < 0.05

    def test_relu_kills_negatives(self):
        p = RhlParams(seed=1, input_dim=4, output_dim=16)
        x = np.random.default_rng(2).standard_normal((10, 4))
        out = p.project(x)
        assert out.shape == (10, 16)
        assert (out >= 0).all()
        raw = x @ p.weight
        np.testing.assert_array_equal(out, np.maximum(raw, 0))

    def test_projection_deterministic(self):
        p = RhlParams(seed=5, input_dim=6, output_dim=24)
        x = np.random.default_rng(0).standard_normal((7, 6))
        np.testing.assert_array_equal(p.project(x), p.project(x))

    def test_dimension_mismatch(self):
        p = RhlParams(seed=0, input_dim=6, output_dim=12)
        with pytest.raises(DimensionMismatch):
            rhl_project(np.zeros((3, 5)), p)
        with pytest.raises(DimensionMismatch):
            rhl_project(np.zeros(6), p)

    def test_identity_projection_passthrough(self):
        x = np.random.default_rng(1).standard_normal((4, 3)).astype(np.float32)
        out = IdentityProjection().project(x)
        assert out.dtype == np.float64
        np.testing.assert_array_equal(out, x.astype(np.float64))

    def test_default_output_dim(self):
        p = RhlParams(seed=0, input_dim=2)
        assert p.output_dim == 15000
        assert p.weight.shape == (2, 15000)


class TestKernels:
    def test_linear_is_dot_product(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((3, 4))
        k = kernel_matrix(a, b, KernelSpec(kind="linear"))
        np.testing.assert_array_equal(k, a @ b.T)

    def test_rbf_known_value(self):
        """Points at squared distance 1 with gamma 1 give exp(-1)."""
        a = np.array([[0.0, 0.0]])
        b = np.array([[1.0, 0.0]])
        k = kernel_matrix(a, b, KernelSpec(kind="rbf", gamma=1.0))
        np.testing.assert_allclose(k, np.exp(-1.0), rtol=1e-15)

    def test_rbf_matches_cdist_definition(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((20, 6))
        b = rng.standard_normal((15, 6))
        gamma = 0.37
        k = kernel_matrix(a, b, KernelSpec(kind="rbf", gamma=gamma))
        ref = np.exp(-gamma * cdist(a, b, "sqeuclidean"))
        np.testing.assert_allclose(k, ref, rtol=1e-14)

    def test_rbf_unit_diagonal_exact(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((30, 8)) * 50
        k = kernel_matrix(a, a, KernelSpec(kind="rbf", gamma=2.0))
        np.testing.assert_array_equal(np.diag(k), np.ones(30))

    def test_rbf_symmetric_exact(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((25, 5))
        k = kernel_matrix(a, a, KernelSpec(kind="rbf", gamma=0.5))
        np.testing.assert_array_equal(k, k.T)

    def test_rbf_gram_positive_semidefinite(self):
        rng = np.random.default_rng(5)
        for seed in range(5):
            a = np.random.default_rng(seed).standard_normal((40, 6))
            k = kernel_matrix(a, a, KernelSpec(kind="rbf", gamma=1.3))
            eigs = np.linalg.eigvalsh(k)
            assert eigs.min() > -1e-9

    def test_rbf_bounds(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((10, 4))
        b = rng.standard_normal((12, 4))
        k = kernel_matrix(a, b, KernelSpec(kind="rbf", gamma=1.0))
        assert (k > 0).all() and (k <= 1).all()

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            KernelSpec(kind="rbf")  # gamma required
        with pytest.raises(ValueError):
            KernelSpec(kind="rbf", gamma=-1.0)
        with pytest.raises(ValueError):
            KernelSpec(kind="linear", gamma=1.0)
        with pytest.raises(ValueError):
            KernelSpec(kind="poly", gamma=1.0)

    def test_dimension_mismatch(self):
        spec = KernelSpec(kind="linear")
        with pytest.raises(DimensionMismatch):
            kernel_matrix(np.zeros((2, 3)), np.zeros((2, 4)), spec)
