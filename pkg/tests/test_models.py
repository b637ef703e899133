#!/usr/bin/env python3
"""
Tests for grids, function classes, neighborhoods and noise models.
"""

import math
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models.function_class import (
    FunctionClassSpec,
    PerturbedFunction,
    RateConstants,
    budget_bump,
    center_from_descriptor,
    check_membership,
    check_neighborhood,
    constant_function,
    perturbation_from_descriptor,
    random_center,
    random_perturbation,
    rates,
    sine_function,
    smooth_bump,
    zero_function,
)
from models.grid import Grid, GridDistribution, GridFunction
from models.noise import gaussian_noise, logistic_noise, match_fisher, noise_from_descriptor, tabulated_noise
from utils.errors import InvalidArgumentError


class TestRates(unittest.TestCase):
    """Rate budgets gamma_n and gamma'_n."""

    def test_known_value(self):
        gamma_n, _ = rates(RateConstants(n=1000, c=1.0), FunctionClassSpec(beta=3.0))
        self.assertAlmostEqual(gamma_n, 0.1186, places=4)

    def test_decreasing_in_n(self):
        spec = FunctionClassSpec(beta=3.0)
        self.assertLess(rates(RateConstants(n=4096), spec)[0], rates(RateConstants(n=1024), spec)[0])

    def test_zero_multiplier(self):
        gamma_n, gamma_prime_n = rates(RateConstants(n=500, c=0.0, c_prime=0.0), FunctionClassSpec(beta=2.5))
        self.assertEqual(gamma_n, 0.0)
        self.assertEqual(gamma_prime_n, 0.0)

    def test_small_n_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            rates(RateConstants(n=1), FunctionClassSpec())

    def test_invalid_class(self):
        with self.assertRaises(InvalidArgumentError):
            FunctionClassSpec(M=-1.0)
        with self.assertRaises(InvalidArgumentError):
            FunctionClassSpec(A=1.0, B=0.0)


class TestMembership(unittest.TestCase):
    """Grid-level membership in the Holder class."""

    def setUp(self):
        self.grid = Grid()

    def test_zero_in_every_class(self):
        report = check_membership(zero_function(self.grid), FunctionClassSpec(), self.grid)
        self.assertTrue(report.ok)
        self.assertEqual(report.violations, [])

    def test_constant_above_bound(self):
        spec = FunctionClassSpec(M=0.5)
        report = check_membership(constant_function(self.grid, 2 * spec.M), spec, self.grid)
        self.assertFalse(report.ok)
        self.assertTrue(any("sup|f|" in v for v in report.violations))

    def test_half_sine(self):
        spec = FunctionClassSpec(M=1.0, beta=3.0, L=2.0)
        report = check_membership(sine_function(self.grid, 0.5), spec, self.grid)
        self.assertTrue(report.ok, report.violations)
        self.assertEqual(report.order, 2)

    def test_grid_mismatch(self):
        other = Grid(-5.0, 5.0, 1.0 / 64.0)
        with self.assertRaises(InvalidArgumentError):
            check_membership(zero_function(other), FunctionClassSpec(), self.grid)


class TestNeighborhood(unittest.TestCase):
    """Budgets of the perturbation g around a center."""

    def setUp(self):
        self.grid = Grid()
        self.spec = FunctionClassSpec(M=0.5, beta=3.0, L=1.0, A=-4.0, B=4.0)
        self.rc = RateConstants(n=1000)
        self.gamma_n, self.gamma_prime_n = rates(self.rc, self.spec)
        self.f0 = zero_function(self.grid)

    def _pf(self, g):
        return PerturbedFunction(self.f0, g, self.gamma_n, self.gamma_prime_n)

    def test_null_perturbation(self):
        pf = self._pf(zero_function(self.grid, name="g"))
        self.assertTrue(pf.is_null)
        self.assertTrue(check_neighborhood(pf, self.rc, self.spec).ok)

    def test_double_height_bump_rejected(self):
        g = smooth_bump(self.grid, self.spec.A, self.spec.B, 2.0 * self.gamma_n)
        report = check_neighborhood(self._pf(g), self.rc, self.spec)
        self.assertFalse(report.ok)
        self.assertTrue(any("gamma_n" in v for v in report.violations))

    def test_budget_bump_accepted(self):
        g = budget_bump(self.grid, self.spec, self.gamma_n, self.gamma_prime_n)
        report = check_neighborhood(self._pf(g), self.rc, self.spec)
        self.assertTrue(report.ok, report.violations)
        self.assertLessEqual(report.g_sup, self.gamma_n * (1 + 1e-9))
        self.assertLessEqual(report.g_slope_sup, self.gamma_prime_n * (1 + 1e-9))

    def test_support_leak_rejected(self):
        g = smooth_bump(self.grid, self.spec.B - 0.5, self.spec.B + 0.5, 0.01)
        report = check_neighborhood(self._pf(g), self.rc, self.spec)
        self.assertFalse(report.ok)
        self.assertTrue(any("outside [A, B]" in v for v in report.violations))

    def test_random_perturbation_within_budget(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            g = random_perturbation(self.grid, self.spec, self.gamma_n, self.gamma_prime_n, rng)
            self.assertLessEqual(g.sup_norm(), self.gamma_n * (1 + 1e-9))
            outside = ~self.grid.inside(self.spec.A, self.spec.B)
            self.assertEqual(float(np.max(np.abs(g.values[outside]))), 0.0)

    def test_random_center_in_class(self):
        rng = np.random.default_rng(4)
        f0 = random_center(self.grid, self.spec, rng)
        self.assertLessEqual(f0.sup_norm(), 0.45 * self.spec.sup_bound + 1e-12)


class TestDescriptors(unittest.TestCase):
    """Functions built from experiment descriptors."""

    def setUp(self):
        self.grid = Grid()
        self.spec = FunctionClassSpec()

    def test_center_families(self):
        self.assertEqual(center_from_descriptor({"family": "zero"}, self.grid).sup_norm(), 0.0)
        const = center_from_descriptor({"family": "constant", "value": 0.3}, self.grid)
        self.assertAlmostEqual(const.evaluate(1.234), 0.3)
        sine = center_from_descriptor({"family": "sine", "amplitude": 0.4}, self.grid)
        self.assertAlmostEqual(sine.evaluate(math.pi / 2), 0.4, places=4)

    def test_unknown_family(self):
        with self.assertRaises(InvalidArgumentError):
            center_from_descriptor({"family": "cubic"}, self.grid)
        with self.assertRaises(InvalidArgumentError):
            perturbation_from_descriptor({"family": "spline"}, self.grid, self.spec, 0.1, 0.1)

    def test_haar_atom_perturbation(self):
        g = perturbation_from_descriptor({"family": "haar_atom", "j": 0, "k": 1, "coefficient": 0.05},
                                         self.grid, self.spec, 0.1, 0.3)
        outside = ~self.grid.inside(self.spec.A, self.spec.B)
        self.assertEqual(float(np.max(np.abs(g.values[outside]))), 0.0)
        self.assertGreater(g.sup_norm(), 0.0)


class TestGridFunction(unittest.TestCase):
    """Evaluation and serialization of grid functions."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.grid = Grid(-1.0, 1.0, 0.25)

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_linear_interpolation_and_fill(self):
        f = GridFunction.from_callable(self.grid, lambda x: 2.0 * x, name="line")
        self.assertAlmostEqual(f.evaluate(0.1), 0.2)
        self.assertAlmostEqual(f.evaluate(5.0), 2.0)
        dens = GridFunction(self.grid, np.ones(self.grid.size), fill=0.0)
        self.assertEqual(dens.evaluate(5.0), 0.0)

    def test_csv_and_json(self):
        f = GridFunction.from_callable(self.grid, np.cos, name="cos")
        back = GridFunction.from_csv(f.to_csv(os.path.join(self.temp_dir, "f.csv")))
        np.testing.assert_allclose(back.values, f.values)
        again = GridFunction.from_json(f.to_json(os.path.join(self.temp_dir, "f.json")))
        self.assertEqual(again.grid, f.grid)
        self.assertEqual(again.name, "cos")

    def test_shape_mismatch(self):
        with self.assertRaises(InvalidArgumentError):
            GridFunction(self.grid, np.zeros(3))

    def test_step_must_divide_domain(self):
        with self.assertRaises(InvalidArgumentError):
            Grid(0.0, 1.0, 0.3)

    def test_distribution_quantile_inverts_cdf(self):
        grid = Grid()
        dist = GridDistribution(grid, np.exp(-0.5 * grid.points ** 2))
        u = np.array([0.1, 0.25, 0.5, 0.9])
        np.testing.assert_allclose(dist.cdf(dist.quantile(u)), u, atol=1e-9)
        self.assertAlmostEqual(dist.quantile(0.5), 0.0, places=6)


class TestNoise(unittest.TestCase):
    """Noise models and Fisher information matching."""

    def test_gaussian_fisher(self):
        self.assertAlmostEqual(gaussian_noise(1.0).fisher_info, 1.0)
        self.assertAlmostEqual(gaussian_noise(2.0).fisher_info, 0.25)

    def test_score_centered(self):
        noise = gaussian_noise(1.0)
        grid = noise.grid
        self.assertAlmostEqual(grid.integrate(noise.score.values * noise.density.values), 0.0, places=8)
        self.assertAlmostEqual(grid.integrate(noise.density.values), 1.0, places=6)

    def test_match_fisher_identity(self):
        noise = gaussian_noise(1.0)
        self.assertIs(match_fisher(noise, 1.0), noise)

    def test_match_fisher_gaussian(self):
        matched = match_fisher(gaussian_noise(1.0), 4.0)
        self.assertAlmostEqual(matched.family.sigma, 0.5)
        self.assertAlmostEqual(matched.fisher_info, 4.0, places=6)

    def test_match_fisher_logistic(self):
        matched = match_fisher(logistic_noise(0.5), 1.0)
        self.assertAlmostEqual(matched.family.scale, 1.0 / math.sqrt(3.0))
        self.assertAlmostEqual(matched.fisher_info, 1.0, places=6)

    def test_descriptor(self):
        noise = noise_from_descriptor({"family": "logistic", "fisher_info": 2.0})
        self.assertEqual(noise.family.kind, "logistic")
        self.assertAlmostEqual(noise.fisher_info, 2.0, places=6)
        with self.assertRaises(InvalidArgumentError):
            noise_from_descriptor({"family": "cauchy"})

    def test_invalid_target(self):
        with self.assertRaises(InvalidArgumentError):
            match_fisher(gaussian_noise(1.0), 0.0)


class TestTabulatedNoise(unittest.TestCase):
    """Densities given only by their values on the grid."""

    @classmethod
    def setUpClass(cls):
        cls.grid = Grid()
        cls.inner = np.abs(cls.grid.points) <= 5.0

    def test_gaussian_table(self):
        ref = gaussian_noise(1.0, self.grid)
        tab = tabulated_noise(self.grid, ref.density.values)
        self.assertAlmostEqual(tab.fisher_info, 1.0, delta=1e-4)
        x = self.grid.points[self.inner]
        np.testing.assert_allclose(tab.score.values[self.inner], -x, atol=1e-6)
        np.testing.assert_allclose(tab.curvature.values[self.inner], -1.0, atol=1e-5)
        np.testing.assert_allclose(tab.density.values, ref.density.values, atol=1e-9)

    def test_logistic_table(self):
        ref = logistic_noise(0.5, self.grid)
        tab = tabulated_noise(self.grid, ref.density.values)
        self.assertAlmostEqual(tab.fisher_info, 4.0 / 3.0, delta=1e-4)
        np.testing.assert_allclose(tab.score.values[self.inner], ref.score.values[self.inner], atol=5e-5)
        self.assertAlmostEqual(tab.third_deriv_bound, ref.third_deriv_bound, delta=1e-2)

    def test_sampling_moments(self):
        tab = tabulated_noise(self.grid, gaussian_noise(1.0, self.grid).density.values)
        draws = tab.sample(np.random.default_rng(17), 200_000)
        self.assertLess(abs(float(np.mean(draws))), 0.02)
        self.assertAlmostEqual(float(np.var(draws)), 1.0, delta=0.02)

    def test_descriptor(self):
        noise = noise_from_descriptor({"family": "tabulated", "of": {"family": "logistic", "scale": 0.5}})
        self.assertEqual(noise.family.kind, "tabulated")
        self.assertAlmostEqual(noise.fisher_info, 4.0 / 3.0, delta=1e-4)

    def test_rejects_nonpositive_values(self):
        values = gaussian_noise(1.0, self.grid).density.values.copy()
        values[10] = 0.0
        with self.assertRaises(InvalidArgumentError):
            tabulated_noise(self.grid, values)


if __name__ == "__main__":
    unittest.main()
