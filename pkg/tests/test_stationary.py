#!/usr/bin/env python3
"""
Tests for the transfer operator, the stationary solver and the stationary-density bound.
"""

import json
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np
from scipy import stats

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models.function_class import constant_function, sine_function, smooth_bump, zero_function
from models.grid import Grid, GridFunction
from models.noise import gaussian_noise
from stationary.transfer import (
    dobrushin_rho,
    lemma61_check,
    max_shift_l1,
    minorization_check,
    sample_stationary,
    shift_l1,
    solve_stationary,
    transfer_apply,
)
from utils.errors import ConvergenceError, InvalidArgumentError


class TestSolveStationary(unittest.TestCase):
    """Fixed points of the transfer operator."""

    @classmethod
    def setUpClass(cls):
        cls.grid = Grid()
        cls.noise = gaussian_noise(1.0, cls.grid)

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_zero_drift_gives_noise_density(self):
        sd = solve_stationary(zero_function(self.grid), self.noise)
        l1 = self.grid.integrate(np.abs(sd.psi.values - self.noise.density.values))
        self.assertLess(l1, 1e-6)

    def test_constant_drift_gives_shifted_density(self):
        theta = 0.3
        sd = solve_stationary(constant_function(self.grid, theta), self.noise)
        oracle = self.noise.pdf(self.grid.points - theta)
        self.assertLess(self.grid.integrate(np.abs(sd.psi.values - oracle)), 1e-6)

    def test_sine_drift(self):
        f = sine_function(self.grid, 0.5)
        sd = solve_stationary(f, self.noise)
        self.assertAlmostEqual(sd.psi.integral(), 1.0, places=6)
        self.assertLess(sd.residual, 1e-8)
        self.assertTrue(np.all(sd.psi.values >= 0))
        self.assertGreaterEqual(sd.rho, 0.0)
        self.assertLess(sd.rho, 1.0)

        # fixed point
        again = transfer_apply(sd.psi, f, self.noise)
        self.assertLess(self.grid.integrate(np.abs(again.values - sd.psi.values)), 1e-8)

    def test_iteration_budget(self):
        with self.assertRaises(ConvergenceError) as ctx:
            solve_stationary(sine_function(self.grid, 0.5), self.noise, max_iter=1)
        self.assertGreater(ctx.exception.last_residual, 0.0)
        self.assertEqual(ctx.exception.module, "stationary")

    def test_report_files(self):
        sd = solve_stationary(zero_function(self.grid), self.noise)
        csv_path = sd.to_csv(os.path.join(self.temp_dir, "psi.csv"))
        with open(csv_path, "r", encoding="utf-8") as f:
            self.assertEqual(f.readline().strip(), "x,value")
        with open(sd.write_report(os.path.join(self.temp_dir, "psi.json")), "r", encoding="utf-8") as f:
            report = json.load(f)
        self.assertIn("residual", report)
        self.assertIn("rho", report)


class TestTransferApply(unittest.TestCase):
    """One application of the transfer operator."""

    def setUp(self):
        self.grid = Grid()
        self.noise = gaussian_noise(1.0, self.grid)

    def _narrow(self):
        vals = np.exp(-0.5 * (self.grid.points / 0.05) ** 2)
        return GridFunction(self.grid, vals / self.grid.integrate(vals), fill=0.0)

    def test_zero_drift_returns_noise(self):
        out = transfer_apply(self._narrow(), zero_function(self.grid), self.noise)
        self.assertLess(self.grid.integrate(np.abs(out.values - self.noise.density.values)), 1e-6)

    def test_rejects_non_density(self):
        psi = self._narrow()
        with self.assertRaises(InvalidArgumentError):
            transfer_apply(psi * 2.0, zero_function(self.grid), self.noise)
        with self.assertRaises(InvalidArgumentError):
            transfer_apply(-psi, zero_function(self.grid), self.noise)


class TestContraction(unittest.TestCase):
    """Dobrushin coefficient and the stationary Hellinger bound."""

    @classmethod
    def setUpClass(cls):
        cls.grid = Grid()
        cls.noise = gaussian_noise(1.0, cls.grid)

    def test_rho_gaussian(self):
        self.assertAlmostEqual(dobrushin_rho(self.noise, 0.5), 2 * stats.norm.cdf(0.5) - 1, delta=1e-3)
        self.assertAlmostEqual(dobrushin_rho(self.noise, 0.5), 0.3829, delta=1e-3)

    def test_shift_l1_gaussian(self):
        self.assertAlmostEqual(shift_l1(self.noise, 1.0), 2 * (2 * stats.norm.cdf(0.5) - 1), delta=1e-4)
        self.assertAlmostEqual(shift_l1(self.noise, -1.0), shift_l1(self.noise, 1.0), places=9)
        self.assertEqual(max_shift_l1(self.noise, 0.0), 0.0)
        self.assertAlmostEqual(max_shift_l1(self.noise, 1.0), shift_l1(self.noise, 1.0), places=12)

    def test_rho_zero(self):
        self.assertEqual(dobrushin_rho(self.noise, 0.0), 0.0)

    def test_rho_grows_with_M(self):
        self.assertGreater(dobrushin_rho(self.noise, 3.0), 0.99)

    def test_identical_functions(self):
        f = sine_function(self.grid, 0.4)
        res = lemma61_check(f, f, self.noise, M=0.5)
        self.assertAlmostEqual(res.lhs, 0.0, places=12)
        self.assertAlmostEqual(res.rhs, 0.0, places=12)
        self.assertTrue(res.holds)

    def test_constant_shift(self):
        res = lemma61_check(constant_function(self.grid, 0.1), zero_function(self.grid), self.noise, M=0.5)
        rho = dobrushin_rho(self.noise, 0.5)
        expected = 2 * (2 * stats.norm.cdf(0.05) - 1) / (1 - rho)
        self.assertAlmostEqual(res.rhs, expected, delta=1e-3)
        self.assertAlmostEqual(res.sup_distance, 0.1)
        self.assertTrue(res.holds)
        self.assertLessEqual(res.lhs, res.rhs)

    def test_small_bump(self):
        f0 = zero_function(self.grid)
        f = smooth_bump(self.grid, -1.0, 1.0, 0.05)
        res = lemma61_check(f, f0, self.noise, M=0.5)
        self.assertTrue(res.holds)
        self.assertGreater(res.lhs, 0.0)
        self.assertLess(res.lhs, res.rhs)


class TestMinorization(unittest.TestCase):
    """Pointwise lower bound of the stationary density by the transition floor."""

    @classmethod
    def setUpClass(cls):
        cls.grid = Grid()
        cls.noise = gaussian_noise(1.0, cls.grid)
        cls.f = sine_function(cls.grid, 0.5)
        cls.sd = solve_stationary(cls.f, cls.noise)

    def test_bounded_drift_is_minorized(self):
        report = minorization_check(self.sd.psi, self.f, self.noise)
        self.assertTrue(report.ok)
        self.assertEqual(report.failing_cells, 0)
        self.assertGreater(report.mu0, 0.0)
        self.assertGreaterEqual(report.worst_ratio, 0.95)
        self.assertAlmostEqual(report.mu0, 2 * stats.norm.cdf(-0.5), delta=1e-3)
        self.assertAlmostEqual(self.sd.minorization_mass, report.mu0, places=12)

    def test_pointwise_floor(self):
        x = self.grid.points
        lo, hi = float(np.min(self.f.values)), float(np.max(self.f.values))
        floor = np.minimum(stats.norm.pdf(x - lo), stats.norm.pdf(x - hi))
        inner = np.abs(x) <= 5.0
        self.assertTrue(np.all(self.sd.psi.values[inner] >= 0.95 * floor[inner]))

    def test_wrong_density_fails(self):
        shifted = constant_function(self.grid, 3.0)
        report = minorization_check(self.noise.density, shifted, self.noise)
        self.assertFalse(report.ok)
        self.assertGreater(report.failing_cells, 0)
        self.assertLess(report.worst_ratio, 0.95)


class TestSampleStationary(unittest.TestCase):
    """Inverse-CDF sampling from a stationary density."""

    @classmethod
    def setUpClass(cls):
        grid = Grid()
        cls.sd = solve_stationary(zero_function(grid), gaussian_noise(1.0, grid))

    def test_standard_normal_mean(self):
        draws = sample_stationary(self.sd, 100_000, seed=11)
        self.assertLess(abs(float(np.mean(draws))), 0.02)
        self.assertLess(abs(float(np.median(draws))), 0.02)

    def test_deterministic(self):
        np.testing.assert_array_equal(sample_stationary(self.sd, 50, seed=5), sample_stationary(self.sd, 50, seed=5))

    def test_negative_count(self):
        with self.assertRaises(InvalidArgumentError):
            sample_stationary(self.sd, -1, seed=0)


if __name__ == "__main__":
    unittest.main()
