#!/usr/bin/env python3
"""
Tests for the Haar expansion on [A, B].
"""

import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from haar import (
    DyadicIndex,
    HaarExpansion,
    choose_j_star,
    coefficient_bounds_check,
    gram_matrix,
    haar_eval,
    haar_expand,
    haar_reconstruct,
    interval_index,
    j_star_required,
    parseval_check,
    residual_check,
    tree_indices,
)
from models.function_class import smooth_bump
from models.grid import Grid, GridFunction
from utils.errors import InvalidArgumentError, SupportViolationError


class TestDyadicIndex(unittest.TestCase):
    """Dyadic tree bookkeeping."""

    def test_parent_and_children(self):
        idx = DyadicIndex(2, 3)
        self.assertEqual(idx.parent(), DyadicIndex(1, 2))
        self.assertEqual(DyadicIndex(1, 2).children(), (DyadicIndex(2, 3), DyadicIndex(2, 4)))
        self.assertIsNone(DyadicIndex(0, 1).parent())

    def test_chain_and_node_id(self):
        self.assertEqual(DyadicIndex(2, 3).chain(), [DyadicIndex(2, 3), DyadicIndex(1, 2), DyadicIndex(0, 1)])
        self.assertEqual(DyadicIndex(0, 1).node_id, 0)
        self.assertEqual(DyadicIndex(2, 3).node_id, 5)
        self.assertEqual(len(list(tree_indices(3))), 15)

    def test_invalid(self):
        with self.assertRaises(InvalidArgumentError):
            DyadicIndex(1, 3)
        with self.assertRaises(InvalidArgumentError):
            DyadicIndex(-1, 1)

    def test_interval_index(self):
        self.assertEqual(interval_index(0.0, 0.0, 1.0, 1), 1)
        self.assertEqual(interval_index(0.5, 0.0, 1.0, 1), 1)
        self.assertEqual(interval_index(0.50001, 0.0, 1.0, 1), 2)
        self.assertEqual(interval_index(1.0, 0.0, 1.0, 1), 2)
        self.assertEqual(interval_index(1.5, 0.0, 1.0, 1), 0)
        self.assertEqual(interval_index(-0.1, 0.0, 1.0, 3), 0)


class TestBasis(unittest.TestCase):
    """Basis functions and their orthonormality."""

    def test_scaling_function(self):
        self.assertAlmostEqual(haar_eval(None, 0.3, 0.0, 1.0), 1.0)
        self.assertAlmostEqual(haar_eval(None, 0.3, -1.0, 1.0), 2 ** -0.5)
        self.assertEqual(haar_eval(None, 1.3, 0.0, 1.0), 0.0)

    def test_mother_wavelet(self):
        root = DyadicIndex(0, 1)
        self.assertAlmostEqual(haar_eval(root, 0.25, 0.0, 1.0), 1.0)
        self.assertAlmostEqual(haar_eval(root, 0.75, 0.0, 1.0), -1.0)
        self.assertAlmostEqual(haar_eval(DyadicIndex(1, 1), 0.1, 0.0, 1.0), 2 ** 0.5)

    def test_gram_identity(self):
        gram = gram_matrix(-1.0, 1.0, max_level=4)
        np.testing.assert_allclose(gram, np.eye(gram.shape[0]), atol=1e-12)


class TestExpansion(unittest.TestCase):
    """Coefficients, bounds and reconstruction."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.grid = Grid()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def _on(self, fn, A, B):
        x = self.grid.points
        return GridFunction(self.grid, np.where((x >= A) & (x <= B), fn(x), 0.0), name="g")

    def test_constant(self):
        kappa = 0.2
        g = self._on(lambda x: np.full_like(x, kappa), -1.0, 1.0)
        exp = haar_expand(g, -1.0, 1.0, 3)
        self.assertAlmostEqual(exp.c0, kappa * 2 ** 0.5, places=10)
        for _, value in exp.items():
            self.assertAlmostEqual(value, 0.0, places=12)

    def test_identity_on_unit_interval(self):
        g = self._on(lambda x: x, 0.0, 1.0)
        exp = haar_expand(g, 0.0, 1.0, 2)
        self.assertAlmostEqual(exp.coefficient(DyadicIndex(0, 1)), -0.25, places=10)
        self.assertEqual(exp.coefficient(DyadicIndex(5, 1)), 0.0)
        self.assertEqual(exp.j_star, 2)

    def test_bounds_and_residual(self):
        g = smooth_bump(self.grid, -1.0, 1.0, 0.1)
        exp = haar_expand(g, -1.0, 1.0, 5)
        self.assertTrue(coefficient_bounds_check(exp, g, -1.0, 1.0).ok)
        report = residual_check(exp, g)
        self.assertTrue(report.ok)
        self.assertLessEqual(report.max_residual, report.bound + report.slack)
        holds, energy, total = parseval_check(exp, g)
        self.assertTrue(holds)
        self.assertLessEqual(energy, total + 1e-9)

    def test_reconstruction_improves_with_depth(self):
        g = smooth_bump(self.grid, -1.0, 1.0, 0.1)
        coarse = residual_check(haar_expand(g, -1.0, 1.0, 1), g).max_residual
        fine = residual_check(haar_expand(g, -1.0, 1.0, 6), g).max_residual
        self.assertLess(fine, coarse)

    def test_truncated(self):
        g = smooth_bump(self.grid, -1.0, 1.0, 0.1)
        exp = haar_expand(g, -1.0, 1.0, 5)
        short = exp.truncated(2)
        self.assertEqual(short.j_star, 2)
        self.assertGreater(short.residual_sup_bound, exp.residual_sup_bound)
        with self.assertRaises(InvalidArgumentError):
            short.truncated(3)

    def test_zeroed_reconstructs_zero(self):
        g = smooth_bump(self.grid, -1.0, 1.0, 0.1)
        exp = haar_expand(g, -1.0, 1.0, 3).zeroed()
        np.testing.assert_array_equal(haar_reconstruct(exp, np.linspace(-1, 1, 11)), np.zeros(11))

    def test_json(self):
        g = smooth_bump(self.grid, -1.0, 1.0, 0.1)
        exp = haar_expand(g, -1.0, 1.0, 3)
        back = HaarExpansion.from_json(exp.to_json(os.path.join(self.temp_dir, "haar.json")))
        self.assertEqual(back.j_star, 3)
        self.assertAlmostEqual(back.c0, exp.c0)
        self.assertAlmostEqual(back.coefficient(DyadicIndex(2, 3)), exp.coefficient(DyadicIndex(2, 3)))

    def test_support_violation(self):
        g = smooth_bump(self.grid, -2.0, 2.0, 0.1)
        with self.assertRaises(SupportViolationError):
            haar_expand(g, -1.0, 1.0, 2)

    def test_choose_j_star(self):
        self.assertEqual(choose_j_star(1, 2.0, -1.0, 1.0, 1.0, 1.0), 0)
        self.assertEqual(choose_j_star(4096, 2.0, -1.0, 1.0, 1.0, 1.0), 8)
        self.assertLessEqual(choose_j_star(16, 0.01, -1.0, 1.0, 0.01, 1.0), 8)

    def test_j_star_cap_binds(self):
        self.assertEqual(j_star_required(4096, 2.0, -1.0, 1.0, 1.0, 1.0), 83)
        with self.assertLogs("haar.expansion", level="WARNING") as logs:
            self.assertEqual(choose_j_star(4096, 2.0, -1.0, 1.0, 1.0, 1.0), 8)
        self.assertIn("capping at 8", logs.output[0])

    def test_j_star_below_cap(self):
        self.assertEqual(j_star_required(4, 0.25, -1.0, 1.0, 1.0, 1.0), 3)
        self.assertEqual(choose_j_star(4, 0.25, -1.0, 1.0, 1.0, 1.0), 3)
        self.assertEqual(j_star_required(16, 0.01, -1.0, 1.0, 0.01, 1.0), 0)


if __name__ == "__main__":
    unittest.main()
