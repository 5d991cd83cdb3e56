#!/usr/bin/env python3
"""
Unit tests for the dense tensor type and the multilinear algebra primitives.
"""

import itertools
import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.tensor_core import (
    DenseTensor,
    fold,
    frobenius_norm,
    has_orthonormal_columns,
    khatri_rao,
    kronecker,
    mode_product,
    multi_mode_product,
    outer_product,
    pseudo_inverse,
    tensor_from_factors,
    unfold,
)
from core.types import TensorError


def column_index(index, dims, mode):
    """Column of element `index` in the mode unfolding, earlier modes fastest."""
    column, stride = 0, 1
    for k, (i, d) in enumerate(zip(index, dims)):
        if k == mode:
            continue
        column += i * stride
        stride *= d
    return column


class TestDenseTensor(unittest.TestCase):

    def test_from_flat_is_last_index_fastest(self):
        t = DenseTensor.from_flat((2, 3), range(6))
        self.assertEqual(t.dims, (2, 3))
        self.assertEqual(t[0, 2], 2.0)
        self.assertEqual(t[1, 0], 3.0)

    def test_from_flat_rejects_wrong_length(self):
        with self.assertRaises(TensorError) as ctx:
            DenseTensor.from_flat((2, 2), [1.0, 2.0, 3.0])
        self.assertEqual(ctx.exception.error_type, "shape")

    def test_zero_dimension_rejected(self):
        with self.assertRaises(TensorError):
            DenseTensor(np.zeros((2, 0)))

    def test_data_is_read_only_copy(self):
        source = np.ones((2, 2))
        t = DenseTensor(source)
        source[0, 0] = 5.0
        self.assertEqual(t[0, 0], 1.0)
        with self.assertRaises(ValueError):
            t.data[0, 0] = 2.0


class TestUnfoldFold(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_matrix_unfolds_to_itself(self):
        m = self.rng.standard_normal((3, 4))
        np.testing.assert_array_equal(unfold(m, 0), m)

    def test_unfold_matches_index_formula(self):
        t = DenseTensor.from_flat((2, 2, 2), np.arange(1, 9))
        for mode in range(3):
            m = unfold(t, mode)
            self.assertEqual(m.shape, (2, 4))
            for index in itertools.product(range(2), repeat=3):
                self.assertEqual(m[index[mode], column_index(index, t.dims, mode)], t[index])

    def test_unfold_mode_zero_of_one_to_eight(self):
        t = DenseTensor.from_flat((2, 2, 2), np.arange(1, 9))
        np.testing.assert_array_equal(unfold(t, 0), [[1, 3, 2, 4], [5, 7, 6, 8]])

    def test_unfold_of_zeros(self):
        m = unfold(DenseTensor.zeros((2, 3, 4)), 1)
        self.assertEqual(m.shape, (3, 8))
        self.assertFalse(np.any(m))

    def test_invalid_mode(self):
        with self.assertRaises(TensorError) as ctx:
            unfold(np.zeros((2, 2)), 2)
        self.assertEqual(ctx.exception.error_type, "invalid-mode")

    def test_fold_of_zero_matrix(self):
        t = fold(np.zeros((2, 4)), 0, (2, 2, 2))
        self.assertEqual(t.dims, (2, 2, 2))
        self.assertFalse(np.any(t.data))

    def test_fold_hand_enumerated_matrix(self):
        t = fold(np.array([[1, 3, 2, 4], [5, 7, 6, 8]]), 0, (2, 2, 2))
        np.testing.assert_array_equal(t.flat, np.arange(1, 9))

    def test_fold_shape_mismatch(self):
        with self.assertRaises(TensorError) as ctx:
            fold(np.zeros((2, 3)), 0, (2, 2, 2))
        self.assertEqual(ctx.exception.error_type, "shape")

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(min_value=1, max_value=4), min_size=1, max_size=5), st.integers(0, 2 ** 31 - 1))
    def test_fold_unfold_round_trip_is_exact(self, dims, seed):
        t = DenseTensor(np.random.default_rng(seed).standard_normal(dims))
        for mode in range(len(dims)):
            back = fold(unfold(t, mode), mode, dims)
            np.testing.assert_array_equal(back.data, t.data)

    def test_norm_preserved_by_unfolding(self):
        t = self.rng.standard_normal((3, 4, 5))
        norm = frobenius_norm(t)
        for mode in range(3):
            self.assertAlmostEqual(np.linalg.norm(unfold(t, mode)), norm, delta=1e-14 * norm)


class TestModeProducts(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(1)

    def test_identity_product(self):
        t = self.rng.standard_normal((3, 4, 2))
        np.testing.assert_allclose(mode_product(t, np.eye(4), 1).data, t, atol=1e-15)

    def test_rank_one_times_matrix(self):
        a, b, c = self.rng.standard_normal(3), self.rng.standard_normal(4), self.rng.standard_normal(2)
        m = self.rng.standard_normal((5, 3))
        result = mode_product(outer_product([a, b, c]), m, 0)
        np.testing.assert_allclose(result.data, outer_product([m @ a, b, c]).data, atol=1e-12)

    def test_against_naive_summation(self):
        t = self.rng.standard_normal((3, 4, 2))
        u = self.rng.standard_normal((5, 4))
        expected = np.zeros((3, 5, 2))
        for i, j, k, m in itertools.product(range(3), range(5), range(2), range(4)):
            expected[i, j, k] += t[i, m, k] * u[j, m]
        result = mode_product(t, u, 1).data
        self.assertLess(np.linalg.norm(result - expected) / np.linalg.norm(expected), 1e-12)

    def test_dimension_mismatch(self):
        with self.assertRaises(TensorError) as ctx:
            mode_product(np.zeros((2, 3)), np.zeros((4, 2)), 1)
        self.assertEqual(ctx.exception.error_type, "shape")

    def test_multi_mode_identity(self):
        t = self.rng.standard_normal((2, 3, 4))
        result = multi_mode_product(t, [(np.eye(2), 0), (np.eye(3), 1), (np.eye(4), 2)])
        np.testing.assert_allclose(result.data, t, atol=1e-15)

    def test_multi_mode_order_independent(self):
        t = self.rng.standard_normal((2, 3, 4))
        u0, u1 = self.rng.standard_normal((5, 2)), self.rng.standard_normal((6, 3))
        first = multi_mode_product(t, [(u0, 0), (u1, 1)]).data
        second = multi_mode_product(t, [(u1, 1), (u0, 0)]).data
        self.assertLess(np.linalg.norm(first - second) / np.linalg.norm(first), 1e-12)

    def test_multi_mode_scalar_core(self):
        a, b, c = self.rng.standard_normal((3, 1)), self.rng.standard_normal((4, 1)), self.rng.standard_normal((2, 1))
        result = multi_mode_product(np.full((1, 1, 1), 2.5), [(a, 0), (b, 1), (c, 2)])
        np.testing.assert_allclose(result.data, 2.5 * outer_product([a[:, 0], b[:, 0], c[:, 0]]).data, atol=1e-14)

    def test_multi_mode_duplicate_mode(self):
        with self.assertRaises(TensorError) as ctx:
            multi_mode_product(np.zeros((2, 2)), [(np.eye(2), 0), (np.eye(2), 0)])
        self.assertEqual(ctx.exception.error_type, "invalid-argument")

    def test_kronecker_unfolding_identity(self):
        g = self.rng.standard_normal((2, 3, 2))
        factors = [self.rng.standard_normal((4, 2)), self.rng.standard_normal((5, 3)), self.rng.standard_normal((3, 2))]
        t = tensor_from_factors(g, factors)
        for n in range(3):
            others = [factors[k] for k in reversed(range(3)) if k != n]
            expected = factors[n] @ unfold(g, n) @ kronecker(others[0], others[1]).T
            np.testing.assert_allclose(unfold(t, n), expected, atol=1e-10)

    def test_khatri_rao_first_matrix_fastest(self):
        a, b = self.rng.standard_normal((3, 2)), self.rng.standard_normal((4, 2))
        kr = khatri_rao([a, b])
        for r in range(2):
            np.testing.assert_allclose(kr[:, r], np.kron(b[:, r], a[:, r]))


class TestProductsAndNorms(unittest.TestCase):

    def test_outer_product_unit_vectors(self):
        np.testing.assert_array_equal(outer_product([[1, 0], [0, 1]]).data, [[0, 1], [0, 0]])

    def test_outer_product_with_zero_vector(self):
        self.assertFalse(np.any(outer_product([[1, 2], [0, 0], [3]]).data))

    def test_outer_product_entries(self):
        t = outer_product([[1, 2], [3, 4], [5, 6]])
        self.assertEqual(t[1, 1, 1], 48.0)
        self.assertEqual(t[0, 0, 0], 15.0)

    def test_outer_product_needs_two_vectors(self):
        with self.assertRaises(TensorError) as ctx:
            outer_product([[1.0, 2.0]])
        self.assertEqual(ctx.exception.error_type, "invalid-argument")

    def test_kronecker(self):
        np.testing.assert_array_equal(kronecker(np.eye(2), np.eye(3)), np.eye(6))
        np.testing.assert_array_equal(kronecker([[1, 2]], [[3], [4]]), [[3, 6], [4, 8]])

    def test_frobenius_norm(self):
        self.assertEqual(frobenius_norm(np.zeros((2, 2))), 0.0)
        self.assertAlmostEqual(frobenius_norm(np.ones((2, 2, 2))), np.sqrt(8), places=15)


class TestPseudoInverse(unittest.TestCase):

    def assert_moore_penrose(self, m, p):
        np.testing.assert_allclose(m @ p @ m, m, atol=1e-8)
        np.testing.assert_allclose(p @ m @ p, p, atol=1e-8)
        np.testing.assert_allclose((m @ p).T, m @ p, atol=1e-8)
        np.testing.assert_allclose((p @ m).T, p @ m, atol=1e-8)

    def test_identity(self):
        np.testing.assert_allclose(pseudo_inverse(np.eye(4)), np.eye(4))

    def test_rank_deficient_diagonal(self):
        np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_random_full_rank(self):
        m = np.random.default_rng(2).standard_normal((6, 3))
        self.assert_moore_penrose(m, pseudo_inverse(m))

    def test_random_rank_deficient(self):
        rng = np.random.default_rng(3)
        m = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 5))
        self.assert_moore_penrose(m, pseudo_inverse(m))

    def test_negative_tolerance(self):
        with self.assertRaises(TensorError):
            pseudo_inverse(np.eye(2), tol=-1.0)

    def test_orthonormal_check(self):
        q, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((5, 3)))
        self.assertTrue(has_orthonormal_columns(q))
        self.assertFalse(has_orthonormal_columns(2 * q))


if __name__ == '__main__':
    unittest.main()
