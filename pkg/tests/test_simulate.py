#!/usr/bin/env python3
"""
Tests for the autoregressive and regression samplers and the design rearrangement.
"""

import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from likelihood.partition import partition
from models.function_class import PerturbedFunction, sine_function, smooth_bump, zero_function
from models.grid import Grid
from models.noise import gaussian_noise
from simulate.rearrange import rearrange_blocks
from simulate.samples import design_points, simulate_ar, simulate_fixed_design, simulate_random_design
from stationary.transfer import solve_stationary
from utils.errors import InvalidArgumentError, RearrangementError
from utils.file_utils import read_csv


class TestSimulateAr(unittest.TestCase):
    """Autoregressive trajectories."""

    @classmethod
    def setUpClass(cls):
        cls.grid = Grid()
        cls.noise = gaussian_noise(1.0, cls.grid)
        cls.null = PerturbedFunction(zero_function(cls.grid), zero_function(cls.grid, name="g"), 0.1, 0.3)
        cls.sd0 = solve_stationary(cls.null.f0, cls.noise)
        f0 = sine_function(cls.grid, 0.4)
        cls.pf = PerturbedFunction(f0, smooth_bump(cls.grid, -1.0, 1.0, 0.05), 0.1, 0.3)
        cls.sd_f = solve_stationary(cls.pf.f, cls.noise)

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_zero_drift_is_white_noise(self):
        traj = simulate_ar(self.null, self.noise, self.sd0, 200, seed=1)
        np.testing.assert_array_equal(traj.x[1:], traj.eps)
        self.assertEqual(traj.n, 200)
        self.assertEqual(traj.x.size, 201)

    def test_reconstruction(self):
        traj = simulate_ar(self.pf, self.noise, self.sd_f, 500, seed=2)
        self.assertEqual(traj.reconstruction_error(), 0.0)
        np.testing.assert_array_equal(traj.covariates, traj.x[:-1])
        np.testing.assert_array_equal(traj.responses, traj.x[1:])

    def test_deterministic_given_seed(self):
        a = simulate_ar(self.pf, self.noise, self.sd_f, 50, seed=9)
        b = simulate_ar(self.pf, self.noise, self.sd_f, 50, seed=9)
        c = simulate_ar(self.pf, self.noise, self.sd_f, 50, seed=10)
        np.testing.assert_array_equal(a.x, b.x)
        self.assertFalse(np.array_equal(a.x, c.x))

    def test_empty_trajectory(self):
        traj = simulate_ar(self.pf, self.noise, self.sd_f, 0, seed=3)
        self.assertEqual(traj.n, 0)
        self.assertEqual(traj.x.size, 1)
        self.assertEqual(traj.reconstruction_error(), 0.0)

    def test_invalid_arguments(self):
        with self.assertRaises(InvalidArgumentError):
            simulate_ar(self.pf, self.noise, self.sd_f, -1, seed=3)
        with self.assertRaises(InvalidArgumentError):
            simulate_ar(self.pf, self.noise, self.sd_f, 5, seed=3, law="g")

    def test_csv(self):
        traj = simulate_ar(self.pf, self.noise, self.sd_f, 10, seed=4)
        rows = read_csv(traj.to_csv(os.path.join(self.temp_dir, "ar.csv")))
        self.assertEqual(len(rows), 10)
        self.assertEqual(list(rows[0].keys()), ["index", "x", "y", "innovation"])


class TestRegression(unittest.TestCase):
    """Random and regular design regression samples."""

    @classmethod
    def setUpClass(cls):
        cls.grid = Grid()
        cls.noise = gaussian_noise(1.0, cls.grid)
        cls.pf = PerturbedFunction(zero_function(cls.grid), smooth_bump(cls.grid, -1.0, 1.0, 0.05), 0.1, 0.3)
        cls.sd0 = solve_stationary(cls.pf.f0, cls.noise)

    def test_random_design(self):
        sample = simulate_random_design(self.pf, self.noise, self.sd0, 300, seed=5)
        self.assertEqual(sample.n, 300)
        np.testing.assert_allclose(sample.y, sample.signal + sample.eta)
        np.testing.assert_allclose(sample.signal, self.pf.f.evaluate(sample.xi))

    def test_random_design_empty(self):
        self.assertEqual(simulate_random_design(self.pf, self.noise, self.sd0, 0, seed=5).n, 0)

    def test_design_points_median(self):
        np.testing.assert_allclose(design_points(self.sd0, 1), [0.0], atol=1e-6)

    def test_design_points_quartiles(self):
        t = design_points(self.sd0, 2)
        np.testing.assert_allclose(t, [-0.6745, 0.6745], atol=1e-3)

    def test_design_points_cdf(self):
        t = design_points(self.sd0, 3)
        self.assertAlmostEqual(float(self.sd0.cdf(t[1])), 0.5, places=6)
        self.assertTrue(np.all(np.diff(design_points(self.sd0, 100)) >= 0))

    def test_design_points_rejects_zero(self):
        with self.assertRaises(InvalidArgumentError):
            design_points(self.sd0, 0)

    def test_fixed_design(self):
        t = design_points(self.sd0, 64)
        sample = simulate_fixed_design(self.pf, self.noise, t, seed=6)
        np.testing.assert_array_equal(sample.t, t)
        np.testing.assert_allclose(sample.y - sample.eta, self.pf.f.evaluate(t))
        null = simulate_fixed_design(self.pf, self.noise, t, seed=6, law="f0")
        np.testing.assert_array_equal(null.eta, sample.eta)


class TestRearrange(unittest.TestCase):
    """Blockwise rearrangement of the regular design."""

    @classmethod
    def setUpClass(cls):
        grid = Grid()
        cls.sd0 = solve_stationary(zero_function(grid), gaussian_noise(1.0, grid))

    def test_single_block_identity(self):
        t = design_points(self.sd0, 1)
        res = rearrange_blocks(t, self.sd0, partition(1))
        np.testing.assert_array_equal(res.t, t)
        np.testing.assert_array_equal(res.permutation, [0])

    def test_two_blocks_round_robin(self):
        t = design_points(self.sd0, 64)
        res = rearrange_blocks(t, self.sd0, partition(64))
        np.testing.assert_array_equal(np.sort(res.permutation), np.arange(64))
        np.testing.assert_array_equal(res.t[:32], t[0::2])
        np.testing.assert_array_equal(res.t[32:], t[1::2])
        self.assertLess(res.constant, 1.0)

    def test_constant_bounded(self):
        t = design_points(self.sd0, 1000)
        res = rearrange_blocks(t, self.sd0, partition(1000))
        np.testing.assert_array_equal(np.sort(res.t), t)
        self.assertLess(res.constant, 2.0)

    def test_size_mismatch(self):
        with self.assertRaises(RearrangementError):
            rearrange_blocks(design_points(self.sd0, 10), self.sd0, partition(12))


if __name__ == "__main__":
    unittest.main()
