#!/usr/bin/env python3
"""
Unit tests for the constrained two-way factorization engines.

Covers the truncated SVD, HALS nonnegative factorization, deflationary ICA,
sparse and smooth component analysis, the kind dispatcher and group
factorizations with shared components.
"""

import os
import sys
import unittest

import numpy as np

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.factor2d import (
    bss_factor,
    group_factorize,
    ica_deflation,
    nmf_hals,
    roughness,
    sca_factor,
    second_difference,
    smoca_factor,
    smooth_column_solve,
    svd_factor,
)
from core.metrics import amari_index, column_correlations, principal_angles, support_f1
from core.synthetic import ica_mixtures, planted_smooth, planted_sparse
from core.types import TensorError
from data_model.run_config_models import ConstraintKind, ConstraintSpec


def assert_nonincreasing(test, trace, slack=1e-9):
    scale = max(abs(trace[0]), 1.0)
    for previous, current in zip(trace, trace[1:]):
        test.assertLessEqual(current, previous + slack * scale)


class TestSvdFactor(unittest.TestCase):

    def test_diagonal_input(self):
        a, d, b = svd_factor(np.diag([3.0, 1.0]), 2)
        np.testing.assert_allclose(d, [3.0, 1.0])
        np.testing.assert_allclose(np.abs(a), np.eye(2), atol=1e-15)
        np.testing.assert_allclose(b, np.eye(2), atol=1e-15)

    def test_rank_one_is_exact(self):
        rng = np.random.default_rng(0)
        y = np.outer(rng.standard_normal(5), rng.standard_normal(4))
        a, d, b = svd_factor(y, 1)
        self.assertLess(np.linalg.norm(y - (a * d) @ b.T), 1e-10)

    def test_best_rank_one_error(self):
        y = np.random.default_rng(1).standard_normal((4, 3))
        a, d, b = svd_factor(y, 1)
        s = np.linalg.svd(y, compute_uv=False)
        self.assertAlmostEqual(np.linalg.norm(y - (a * d) @ b.T) ** 2, np.sum(s[1:] ** 2), delta=1e-10)

    def test_orthonormal_and_sorted(self):
        a, d, b = svd_factor(np.random.default_rng(2).standard_normal((6, 5)), 3)
        np.testing.assert_allclose(a.T @ a, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(b.T @ b, np.eye(3), atol=1e-12)
        self.assertTrue(np.all(np.diff(d) <= 0))

    def test_rank_out_of_range(self):
        with self.assertRaises(TensorError) as ctx:
            svd_factor(np.ones((3, 2)), 3)
        self.assertEqual(ctx.exception.error_type, "invalid-rank")


class TestNmfHals(unittest.TestCase):

    def setUp(self):
        self.spec = ConstraintSpec(kind=ConstraintKind.NONNEGATIVE, max_iters=3000, tol=1e-14)

    def test_exact_positive_model(self):
        rng = np.random.default_rng(3)
        y = rng.uniform(0.1, 1.0, (30, 3)) @ rng.uniform(0.1, 1.0, (20, 3)).T
        pair = nmf_hals(y, 3, self.spec)
        self.assertLess(np.linalg.norm(y - pair.a @ pair.b.T) / np.linalg.norm(y), 1e-3)
        self.assertTrue(np.all(pair.a >= 0))
        self.assertTrue(np.all(pair.b >= 0))

    def test_zero_matrix(self):
        pair = nmf_hals(np.zeros((4, 3)), 2)
        self.assertEqual(pair.final_objective, 0.0)

    def test_objective_trace_nonincreasing(self):
        y = np.random.default_rng(4).uniform(0.0, 1.0, (10, 8))
        pair = nmf_hals(y, 3, ConstraintSpec(kind=ConstraintKind.NONNEGATIVE, max_iters=200))
        assert_nonincreasing(self, pair.objective_trace)
        self.assertGreater(len(pair.objective_trace), 2)

    def test_unit_norm_components(self):
        y = np.random.default_rng(5).uniform(0.0, 1.0, (10, 8))
        pair = nmf_hals(y, 2)
        np.testing.assert_allclose(np.linalg.norm(pair.b, axis=0), 1.0)

    def test_negative_input_rejected(self):
        with self.assertRaises(TensorError) as ctx:
            nmf_hals(np.array([[1.0, -1.0], [0.5, 2.0]]), 1)
        self.assertEqual(ctx.exception.error_type, "invalid-input")

    def test_iteration_cap_warns(self):
        y = np.random.default_rng(6).uniform(0.0, 1.0, (12, 10))
        pair = nmf_hals(y, 4, ConstraintSpec(kind=ConstraintKind.NONNEGATIVE, max_iters=1, tol=1e-15))
        self.assertIn("not-converged", pair.warnings)


class TestIcaDeflation(unittest.TestCase):

    def test_separates_mixtures(self):
        mixtures, sources, mixing = ica_mixtures(2, 2000, seed=0)
        pair = ica_deflation(mixtures, 2)
        self.assertLess(amari_index(np.linalg.pinv(pair.a) @ mixing), 0.1)

    def test_four_sources_across_seeds(self):
        separated = 0
        for seed in range(10):
            mixtures, _, mixing = ica_mixtures(4, 2000, seed=seed)
            pair = ica_deflation(mixtures, 4)
            separated += amari_index(np.linalg.pinv(pair.a) @ mixing) < 0.15
        self.assertGreaterEqual(separated, 9)

    def test_identity_mixing_recovers_sources(self):
        _, sources, _ = ica_mixtures(2, 2000, seed=1)
        pair = ica_deflation(sources, 2)
        correlations = np.abs(column_correlations(pair.b, sources.T))
        self.assertGreater(correlations.max(axis=1).min(), 0.99)

    def test_components_zero_mean_unit_variance(self):
        mixtures, _, _ = ica_mixtures(3, 1500, seed=2)
        pair = ica_deflation(mixtures, 3)
        np.testing.assert_allclose(pair.b.mean(axis=0), 0.0, atol=1e-8)
        np.testing.assert_allclose(pair.b.var(axis=0), 1.0, atol=1e-8)

    def test_gaussian_sources_flagged(self):
        y = np.random.default_rng(3).standard_normal((3, 2000))
        pair = ica_deflation(y, 3)
        self.assertIn("gaussian-sources", pair.warnings)

    def test_rank_deficient(self):
        rng = np.random.default_rng(4)
        y = np.outer(rng.standard_normal(3), rng.uniform(-1, 1, 500))
        with self.assertRaises(TensorError) as ctx:
            ica_deflation(y, 2)
        self.assertEqual(ctx.exception.error_type, "rank-deficient")

    def test_deterministic_for_seed(self):
        mixtures, _, _ = ica_mixtures(2, 1000, seed=5)
        spec = ConstraintSpec(kind=ConstraintKind.INDEPENDENT, seed=7)
        np.testing.assert_array_equal(ica_deflation(mixtures, 2, spec).b, ica_deflation(mixtures, 2, spec).b)


class TestSparseComponents(unittest.TestCase):

    def test_zero_penalty_matches_svd(self):
        y = np.random.default_rng(6).standard_normal((8, 12))
        pair = sca_factor(y, 2, ConstraintSpec(kind=ConstraintKind.SPARSE, penalty_weight=0.0))
        s = np.linalg.svd(y, compute_uv=False)
        self.assertAlmostEqual(pair.final_objective, np.sum(s[2:] ** 2), delta=1e-8 * np.sum(s ** 2))

    def test_large_penalty_zeroes_components(self):
        y = np.random.default_rng(7).standard_normal((6, 9))
        weight = 4.0 * np.linalg.norm(y)
        pair = sca_factor(y, 2, ConstraintSpec(kind=ConstraintKind.SPARSE, penalty_weight=weight))
        self.assertFalse(np.any(pair.b))
        self.assertAlmostEqual(pair.final_objective, np.linalg.norm(y) ** 2, places=8)

    def test_recovers_support(self):
        y, _, b0 = planted_sparse(20, 50, 1, density=0.2, noise=0.01, seed=8)
        pair = sca_factor(y, 1, ConstraintSpec(kind=ConstraintKind.SPARSE, penalty_weight=0.2))
        self.assertGreater(support_f1(b0, pair.b), 0.8)

    def test_sparsity_grows_with_penalty(self):
        y, _, _ = planted_sparse(20, 50, 1, density=0.2, noise=0.01, seed=9)
        zeros = []
        for weight in (0.0, 0.2, 1.0):
            pair = sca_factor(y, 1, ConstraintSpec(kind=ConstraintKind.SPARSE, penalty_weight=weight))
            zeros.append(np.mean(pair.b == 0))
        self.assertEqual(zeros, sorted(zeros))
        self.assertGreater(zeros[1], 0.5)

    def test_objective_trace_nonincreasing(self):
        y = np.random.default_rng(10).standard_normal((10, 15))
        pair = sca_factor(y, 3, ConstraintSpec(kind=ConstraintKind.SPARSE, penalty_weight=0.5))
        assert_nonincreasing(self, pair.objective_trace)


class TestSmoothComponents(unittest.TestCase):

    def test_zero_penalty_matches_svd(self):
        y = np.random.default_rng(11).standard_normal((8, 12))
        pair = smoca_factor(y, 2, ConstraintSpec(kind=ConstraintKind.SMOOTH, penalty_weight=0.0))
        s = np.linalg.svd(y, compute_uv=False)
        self.assertAlmostEqual(pair.final_objective, np.sum(s[2:] ** 2), delta=1e-8 * np.sum(s ** 2))

    def test_smoother_than_svd(self):
        y, _, _ = planted_smooth(20, 100, 2, noise=0.3, seed=12)
        _, _, baseline = svd_factor(y, 2)
        pair = smoca_factor(y, 2, ConstraintSpec(kind=ConstraintKind.SMOOTH, penalty_weight=10.0))
        self.assertLess(np.sum(roughness(pair.b)), np.sum(roughness(baseline)))

    def test_constant_columns_are_free(self):
        self.assertFalse(np.any(roughness(np.ones((10, 2)))))
        np.testing.assert_allclose(second_difference(6) @ np.ones(6), 0.0)

    def test_banded_solve_matches_dense(self):
        c = np.random.default_rng(13).standard_normal(9)
        op = second_difference(9)
        dense = np.linalg.solve(2.0 * np.eye(9) + 0.5 * op.T @ op, c)
        np.testing.assert_allclose(smooth_column_solve(c, 2.0, 0.5), dense, atol=1e-12)

    def test_objective_trace_nonincreasing(self):
        y = np.random.default_rng(14).standard_normal((10, 15))
        pair = smoca_factor(y, 3, ConstraintSpec(kind=ConstraintKind.SMOOTH, penalty_weight=2.0))
        assert_nonincreasing(self, pair.objective_trace)


class TestDispatchAndGroups(unittest.TestCase):

    def setUp(self):
        self.y = np.random.default_rng(15).uniform(0.0, 1.0, (12, 10))

    def test_orthogonal_is_svd(self):
        pair = bss_factor(self.y, 2, ConstraintSpec(kind=ConstraintKind.ORTHOGONAL))
        a, d, b = svd_factor(self.y, 2)
        np.testing.assert_allclose(pair.b, b)
        np.testing.assert_allclose(pair.a, a * d)

    def test_nonnegative_dispatch(self):
        pair = bss_factor(self.y, 2, ConstraintSpec(kind=ConstraintKind.NONNEGATIVE))
        self.assertTrue(np.all(pair.a >= 0) and np.all(pair.b >= 0))

    def test_every_kind_returns_rank_columns(self):
        for kind in ConstraintKind:
            pair = bss_factor(self.y, 2, ConstraintSpec(kind=kind, penalty_weight=0.1))
            self.assertEqual(pair.a.shape, (12, 2), kind)
            self.assertEqual(pair.b.shape, (10, 2), kind)
            self.assertGreaterEqual(pair.final_objective, 0.0)

    def test_single_matrix_group(self):
        spec = ConstraintSpec(kind=ConstraintKind.ORTHOGONAL)
        [pair] = group_factorize([self.y], 2, spec)
        np.testing.assert_allclose(pair.b, bss_factor(self.y, 2, spec).b)

    def test_independent_group_matches_separate_calls(self):
        spec = ConstraintSpec(kind=ConstraintKind.NONNEGATIVE)
        other = self.y[::-1] * 2.0
        pairs = group_factorize([self.y, other], 2, spec)
        np.testing.assert_allclose(pairs[1].b, bss_factor(other, 2, spec).b)

    def test_shared_components(self):
        rng = np.random.default_rng(16)
        b0 = rng.standard_normal((20, 2))
        ys = [rng.standard_normal((8, 2)) @ b0.T, rng.standard_normal((6, 2)) @ b0.T]
        pairs = group_factorize(ys, 2, ConstraintSpec(kind=ConstraintKind.ORTHOGONAL), share_b=True)
        self.assertIs(pairs[0].b, pairs[1].b)
        self.assertLess(np.max(principal_angles(pairs[0].b, b0)), 1e-6)
        for y, pair in zip(ys, pairs):
            self.assertLess(np.linalg.norm(y - pair.a @ pair.b.T), 1e-8)

    def test_shared_components_need_equal_columns(self):
        with self.assertRaises(TensorError) as ctx:
            group_factorize([np.ones((3, 4)), np.ones((3, 5))], 1, ConstraintSpec(), share_b=True)
        self.assertEqual(ctx.exception.error_type, "shape")


if __name__ == '__main__':
    unittest.main()
