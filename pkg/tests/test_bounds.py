#!/usr/bin/env python3
"""
Tests for the exponential moment bound and the tail frequencies of localized sums.
"""

import math
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from bounds.exponential import (
    BoundedVariableSpec,
    bounded_laws,
    exp_inequality_check,
    two_point,
    uniform_variable,
    zero_variable,
)
from bounds.tails import exceedance_curve, mixing_tail_check, stopping_time_sums, wilson_interval
from coupling import ScoreLaw, WienerFamily, embed_ar_side
from models.function_class import zero_function
from models.grid import Grid
from models.noise import gaussian_noise
from stationary.transfer import solve_stationary
from utils.errors import InvalidArgumentError, SpecViolationError
from utils.file_utils import read_csv


class TestExponentialBound(unittest.TestCase):
    """E exp(lam xi) against exp(c lam^2 E xi^2)."""

    def test_symmetric_two_point(self):
        report = exp_inequality_check(two_point(1.0), lambdas=[1.0], reps=1000, seed=1)
        row = report.rows[0]
        self.assertAlmostEqual(row.exact_lhs, math.cosh(1.0), places=12)
        self.assertAlmostEqual(row.exact_lhs, 1.5431, places=4)
        self.assertAlmostEqual(row.rhs, math.exp(math.e / 2.0), places=12)
        self.assertAlmostEqual(row.rhs, 3.893, places=3)
        self.assertTrue(report.holds)

    def test_lambda_zero(self):
        report = exp_inequality_check(uniform_variable(1.0), lambdas=[0.0], reps=100, seed=2)
        self.assertEqual(report.rows[0].lhs, 1.0)
        self.assertEqual(report.rows[0].rhs, 1.0)
        self.assertTrue(report.holds)

    def test_zero_variable(self):
        report = exp_inequality_check(zero_variable(), reps=100, seed=3)
        for row in report.rows:
            self.assertEqual(row.exact_lhs, 1.0)
            self.assertEqual(row.rhs, 1.0)
        self.assertTrue(report.holds)

    def test_default_family(self):
        for spec in bounded_laws(1.0):
            self.assertTrue(exp_inequality_check(spec, reps=20_000, seed=4).holds, spec.name)

    def test_asymmetric_two_point_centered(self):
        spec = two_point(1.0, 1.0 / 3.0)
        self.assertAlmostEqual(float(np.dot(spec.probs, spec.atoms)), 0.0, places=12)
        self.assertEqual(spec.a, 1.0)

    def test_invalid(self):
        with self.assertRaises(InvalidArgumentError):
            exp_inequality_check(two_point(1.0), lambdas=[1.5], reps=100)
        with self.assertRaises(InvalidArgumentError):
            exp_inequality_check(two_point(1.0), reps=1)
        with self.assertRaises(InvalidArgumentError):
            two_point(-1.0)

    def test_declared_bound_enforced(self):
        liar = BoundedVariableSpec(name="liar", a=0.5, sampler=lambda rng, size: rng.uniform(-1.0, 1.0, size))
        with self.assertRaises(SpecViolationError):
            exp_inequality_check(liar, reps=1000, seed=5)


class TestTails(unittest.TestCase):
    """Exceedance frequencies of centered sums."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_constant_sums_never_exceed(self):
        sums = np.tile(np.arange(7, dtype=float), (150, 1))
        report = mixing_tail_check(sums, m=256, c_lambda=1.0)
        self.assertEqual(len(report.rows), 7)
        self.assertEqual(report.max_frequency, 0.0)

    def test_curve_monotone(self):
        rng = np.random.default_rng(6)
        sums = rng.normal(0.0, 20.0, size=(500, 3))
        curve = exceedance_curve(sums, 64, [0.1, 0.5, 1.0, 2.0, 4.0])
        self.assertTrue(all(a >= b for a, b in zip(curve, curve[1:])))
        self.assertGreater(curve[0], curve[-1])

    def test_known_expectations(self):
        sums = np.full((100, 3), 5.0)
        report = mixing_tail_check(sums, m=16, c_lambda=0.1, expectations=[0.0, 0.0, 0.0])
        self.assertEqual(report.max_frequency, 1.0)

    def test_csv(self):
        rng = np.random.default_rng(7)
        report = mixing_tail_check(rng.normal(size=(120, 3)), m=32, c_lambda=0.2)
        rows = read_csv(report.to_csv(os.path.join(self.temp_dir, "tails.csv")))
        self.assertEqual(len(rows), 3)
        self.assertIn("wilson_high", rows[0])

    def test_too_few_reps(self):
        with self.assertRaises(InvalidArgumentError):
            mixing_tail_check(np.zeros((99, 3)), m=16, c_lambda=1.0)

    def test_not_a_tree(self):
        with self.assertRaises(InvalidArgumentError):
            mixing_tail_check(np.zeros((100, 4)), m=16, c_lambda=1.0)

    def test_wilson(self):
        low, high = wilson_interval(0, 100)
        self.assertEqual(low, 0.0)
        self.assertLess(high, 0.05)
        low, high = wilson_interval(50, 100)
        self.assertLess(low, 0.5)
        self.assertGreater(high, 0.5)

    def test_stopping_time_sums(self):
        grid = Grid()
        noise = gaussian_noise(1.0, grid)
        f0 = zero_function(grid)
        sd0 = solve_stationary(f0, noise)
        wf = WienerFamily(8, 2, -1.0, 1.0, 1e-3)
        _, ledger = embed_ar_side(f0, noise, sd0, 80, wf, law=ScoreLaw.from_noise(noise, atoms=256))
        sums = stopping_time_sums(ledger)
        self.assertEqual(sums.size, 7)
        inside = ledger.leaf_positions() > 0
        self.assertAlmostEqual(sums[0], float(np.sum(ledger.times[inside])), places=9)
        self.assertAlmostEqual(sums[1] + sums[2], sums[0], places=9)


if __name__ == "__main__":
    unittest.main()
