#!/usr/bin/env python3
"""
Tests for the Wiener family, the Skorokhod stops, the embedding ledgers and
the maximal coupling.
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from coupling import (
    BrownianPath,
    CouplingSetup,
    PathCursor,
    ScoreLaw,
    WienerFamily,
    analytic_expectations,
    berbee_couple,
    calibrate_constant,
    coupled_loglr_pair,
    coupled_replication,
    embed_ar_side,
    embed_regression_side,
    exact_phi,
    geometric_fit,
    phi_mixing_chain,
    r_n,
    set_horizons,
    skorokhod_stop,
    strong_approx_gap,
    z_statistics,
    z_threshold_base,
)
from coupling.embedding import subtree_sums
from haar import DyadicIndex, haar_expand
from models.function_class import PerturbedFunction, sine_function, smooth_bump, zero_function
from models.grid import Grid
from models.noise import gaussian_noise
from stationary.transfer import solve_stationary
from utils.errors import DegenerateConditionalError, HorizonExhaustedError, InvalidArgumentError


class TestSkorokhod(unittest.TestCase):
    """Randomized two-point stopping of a single path."""

    def test_point_mass(self):
        cursor = PathCursor(BrownianPath(1, 0, 1e-3))
        res = skorokhod_stop(cursor, ScoreLaw([0.0], [1.0]), seed=1)
        self.assertEqual(res.tau, 0.0)
        self.assertEqual(res.value, 0.0)

    def test_two_point_law(self):
        a = 0.5
        law = ScoreLaw([-a, a], [0.5, 0.5])
        values, taus = [], []
        for seed in range(400):
            res = skorokhod_stop(PathCursor(BrownianPath(seed, 0, 1e-3)), law, seed=seed)
            values.append(res.value)
            taus.append(res.tau)
        self.assertTrue(set(values) <= {-a, a})
        self.assertLess(abs(np.mean(values)), 0.1)
        # Wald: E tau = Var
        self.assertAlmostEqual(float(np.mean(taus)), a * a, delta=0.05)

    def test_horizon_exhausted(self):
        cursor = PathCursor(BrownianPath(2, 0, 1e-3), horizon=1)
        with self.assertRaises(HorizonExhaustedError):
            skorokhod_stop(cursor, ScoreLaw([-10.0, 10.0], [0.5, 0.5]), seed=2)

    def test_invalid_laws(self):
        with self.assertRaises(InvalidArgumentError):
            ScoreLaw([1.0, 2.0], [0.5, 0.5])
        with self.assertRaises(InvalidArgumentError):
            ScoreLaw([-1.0, 1.0], [0.5, 0.6])

    def test_score_law_from_noise(self):
        law = ScoreLaw.from_noise(gaussian_noise(1.0), atoms=256)
        self.assertEqual(law.size, 256)
        self.assertAlmostEqual(law.mean, 0.0, places=9)
        self.assertAlmostEqual(law.variance, 1.0, delta=0.05)
        self.assertTrue(law.invertible)

    def test_path_reproducible(self):
        a = BrownianPath(5, 3, 1e-3)
        b = BrownianPath(5, 3, 1e-3)
        b.ensure(10000)
        self.assertEqual(a.value(9000), b.value(9000))
        self.assertNotEqual(BrownianPath(5, 4, 1e-3).value(9000), a.value(9000))


class TestEmbedding(unittest.TestCase):
    """Both sides on one Wiener family."""

    @classmethod
    def setUpClass(cls):
        cls.grid = Grid()
        cls.noise = gaussian_noise(1.0, cls.grid)
        cls.law = ScoreLaw.from_noise(cls.noise, atoms=256)
        cls.f0 = sine_function(cls.grid, 0.4)
        cls.pf = PerturbedFunction(cls.f0, smooth_bump(cls.grid, -1.0, 1.0, 0.05), 0.1, 0.3)
        cls.sd0 = solve_stationary(cls.f0, cls.noise)

    def _family(self, seed, horizons=None):
        return WienerFamily(seed, 2, -1.0, 1.0, 1e-3, horizons)

    def test_ar_side(self):
        traj, ledger = embed_ar_side(self.pf, self.noise, self.sd0, 150, self._family(1), law=self.law)
        self.assertEqual(traj.n, 150)
        self.assertLess(traj.reconstruction_error(), 1e-12)
        np.testing.assert_allclose(ledger.values, self.noise.score_at(ledger.eps), atol=1e-9)
        per_step = np.bincount(ledger.steps, weights=ledger.increments, minlength=ledger.m)
        np.testing.assert_allclose(per_step, ledger.values, atol=1e-9)
        self.assertEqual(ledger.audit()["side"], "ar")

    def test_depth_mismatch(self):
        with self.assertRaises(InvalidArgumentError):
            embed_ar_side(self.pf, self.noise, self.sd0, 10, self._family(1), j_star=3, law=self.law)

    def test_horizons_route_to_parents(self):
        horizons = {node: 0.05 for node in range(1, 7)}
        wf = self._family(3, horizons)
        _, ledger_x = embed_ar_side(self.pf, self.noise, self.sd0, 200, wf, law=self.law)
        _, ledger_y = embed_regression_side(self.pf, self.noise, self.sd0, 200, wf, law=self.law)
        self.assertIn(0, set(ledger_x.nodes.tolist()))
        ledger_x.audit()
        ledger_y.audit()
        report = z_statistics(ledger_x, ledger_y, wf)
        self.assertLess(report.cross_check["first"], 1e-8 * max(1.0, float(np.sum(np.abs(ledger_x.values)))))
        self.assertEqual(report.z1.size, 7)
        times = ledger_x.stopping_times(1)
        self.assertTrue(np.all(np.diff(times) >= 0))
        self.assertLessEqual(times[-1], 0.05 + 1e-9)

    def test_fixed_design_side(self):
        t = np.linspace(-2.0, 2.0, 40)
        sample, ledger = embed_regression_side(self.pf, self.noise, t, 0, self._family(4), law=self.law)
        self.assertEqual(sample.n, 40)
        np.testing.assert_array_equal(sample.t, t)
        np.testing.assert_allclose(sample.y, self.f0.evaluate(t) + sample.eta)
        self.assertEqual(ledger.side, "fixed_design")

    def test_strong_approximation_null(self):
        null = PerturbedFunction(self.f0, zero_function(self.grid, name="g"), 0.1, 0.3)
        wf = self._family(6)
        _, lx = embed_ar_side(null, self.noise, self.sd0, 100, wf, law=self.law)
        _, ly = embed_regression_side(null, self.noise, self.sd0, 100, wf, law=self.law)
        report = z_statistics(lx, ly, wf)
        res = strong_approx_gap(null, report, haar_expand(null.g, -1.0, 1.0, 1), lx, ly)
        self.assertEqual(res.direct, 0.0)
        self.assertTrue(res.holds)
        self.assertTrue(res.bound_ok)

    def test_strong_approximation_bound(self):
        wf = self._family(7)
        _, lx = embed_ar_side(self.pf, self.noise, self.sd0, 300, wf, law=self.law)
        _, ly = embed_regression_side(self.pf, self.noise, self.sd0, 300, wf, law=self.law)
        report = z_statistics(lx, ly, wf)
        res = strong_approx_gap(self.pf, report, haar_expand(self.pf.g, -1.0, 1.0, 1), lx, ly)
        self.assertTrue(res.bound_ok)
        self.assertGreater(res.r_n, 0.0)


class TestHorizons(unittest.TestCase):
    """Horizon plans from expected stopping times."""

    def test_telescoping(self):
        expectations = subtree_sums(np.full(4, 100.0), 2)
        plan = set_horizons(expectations, 64, 2)
        self.assertEqual(plan.clamped, [])
        self.assertTrue(math.isinf(plan.T[0]))
        for node in (0, 1, 2):
            self.assertAlmostEqual(plan.subtree_total(node), plan.S[node], places=9)
        leaf = DyadicIndex(2, 1).node_id
        self.assertAlmostEqual(plan.T[leaf], plan.S[leaf])

    def test_clamping(self):
        plan = set_horizons({}, 64, 2)
        self.assertEqual(sorted(plan.clamped), [3, 4, 5, 6])
        self.assertTrue(all(plan.T[n] == 0.0 for n in plan.clamped))

    def test_analytic_expectations(self):
        grid = Grid()
        noise = gaussian_noise(1.0, grid)
        sd0 = solve_stationary(zero_function(grid), noise)
        law = ScoreLaw.from_noise(noise, atoms=256)
        exp = analytic_expectations(sd0, law, 100, 2, -1.0, 1.0)
        mass = float(sd0.cdf(1.0) - sd0.cdf(-1.0))
        self.assertAlmostEqual(exp[0], 100 * mass * law.variance, places=6)
        self.assertAlmostEqual(exp[1] + exp[2], exp[0], places=9)

    def test_invalid(self):
        with self.assertRaises(InvalidArgumentError):
            set_horizons({}, 0, 2)


class TestGapStatistics(unittest.TestCase):
    """Thresholds and calibration."""

    def test_threshold_base(self):
        self.assertAlmostEqual(z_threshold_base(1024, 2), 256 ** 0.25 * math.log(1024))
        self.assertEqual(z_threshold_base(1, 0), 0.0)

    def test_r_n(self):
        self.assertAlmostEqual(r_n(0.1, 0.3, 1000, 2.0), 8.8547 + 1e-6, places=3)
        self.assertEqual(r_n(0.1, 0.3, 1, 2.0), 1.0)

    def test_calibrate(self):
        ratios = np.linspace(0.0, 1.0, 1001)
        self.assertAlmostEqual(calibrate_constant(ratios, 0.995), 0.995)
        self.assertEqual(calibrate_constant([0.3, np.inf, 0.7], 1.0), 0.7)
        with self.assertRaises(InvalidArgumentError):
            calibrate_constant([])
        with self.assertRaises(InvalidArgumentError):
            calibrate_constant([1.0], 0.0)


class TestReplication(unittest.TestCase):
    """Block-by-block coupled replications."""

    @classmethod
    def setUpClass(cls):
        grid = Grid()
        cls.noise = gaussian_noise(1.0, grid)
        f0 = sine_function(grid, 0.4)
        cls.pf = PerturbedFunction(f0, smooth_bump(grid, -1.0, 1.0, 0.05), 0.1, 0.3)
        cls.sd0 = solve_stationary(f0, cls.noise)
        cls.sd_f = solve_stationary(cls.pf.f, cls.noise)

    def _setup(self, design="random"):
        return CouplingSetup(pf=self.pf, noise_p=self.noise, noise_q=self.noise, psi_f0=self.sd0, A=-1.0, B=1.0,
                             depth=2, design=design, pilot_mode="analytic", atoms=256)

    def test_replication_shapes(self):
        rep = coupled_replication(self._setup(), 64, seed=1)
        self.assertEqual(rep.partition.K, 2)
        self.assertEqual(rep.trajectory.x.size, 65)
        self.assertEqual(rep.sample.n, 64)
        self.assertLess(rep.trajectory.reconstruction_error(), 1e-12)
        for ledger in rep.ledgers_x + rep.ledgers_y:
            ledger.audit()
        self.assertEqual(len(rep.gap_reports()), 2)

    def test_fixed_design(self):
        rep = coupled_replication(self._setup("fixed"), 64, seed=2)
        self.assertTrue(hasattr(rep.sample, "t"))
        self.assertEqual(rep.sample.n, 64)

    def test_loglr_pair_deterministic(self):
        setup = self._setup()
        seed = np.random.SeedSequence(11)
        a = coupled_loglr_pair(setup, self.sd_f, 64, "coupled", seed)
        b = coupled_loglr_pair(setup, self.sd_f, 64, "coupled", np.random.SeedSequence(11))
        self.assertEqual(a, b)
        self.assertTrue(all(np.isfinite(a)))

    def test_unknown_construction(self):
        with self.assertRaises(InvalidArgumentError):
            coupled_replication(self._setup(), 64, seed=1, construction="shared")
        with self.assertRaises(InvalidArgumentError):
            CouplingSetup(pf=self.pf, noise_p=self.noise, noise_q=self.noise, psi_f0=self.sd0, A=-1.0, B=1.0,
                          depth=2, design="grid")


class TestBerbee(unittest.TestCase):
    """Maximal coupling and the uniform mixing coefficient."""

    JOINT = np.array([[0.4, 0.1], [0.1, 0.4]])

    def test_exact_phi(self):
        phi, phi_y = exact_phi(self.JOINT)
        self.assertAlmostEqual(phi, 0.3)
        np.testing.assert_allclose(phi_y, [0.3, 0.3])

    def test_coupling(self):
        res = berbee_couple(self.JOINT, seed=4, draws=20000)
        self.assertAlmostEqual(res.phi, 0.3)
        self.assertTrue(res.mismatch_holds)
        self.assertAlmostEqual(res.mismatch, 0.3, delta=0.02)
        self.assertLess(res.ks, 0.02)
        for cell in (0, 1):
            share = float(np.mean(res.xi_tilde[res.eta == cell] == 0))
            self.assertAlmostEqual(share, 0.5, delta=0.02)

    def test_independent_joint(self):
        joint = np.outer([0.2, 0.3, 0.5], [0.6, 0.4])
        res = berbee_couple(joint, seed=5, draws=5000)
        self.assertAlmostEqual(res.phi, 0.0, places=12)
        self.assertEqual(res.mismatch, 0.0)

    def test_degenerate(self):
        with self.assertRaises(DegenerateConditionalError):
            exact_phi(np.array([[0.5, 0.0], [0.5, 0.0]]))
        with self.assertRaises(InvalidArgumentError):
            exact_phi(np.array([[0.5, 0.5], [0.5, 0.5]]))

    def test_geometric_fit(self):
        lags = [1, 2, 3, 4, 5]
        fit = geometric_fit(lags, [0.5 * 0.6 ** k for k in lags])
        self.assertAlmostEqual(fit.rho_hat, 0.6, places=9)
        self.assertAlmostEqual(fit.c0_hat, -1.0 / math.log(0.6), places=9)
        self.assertIsNone(geometric_fit([1, 2], [0.0, 0.0]))

    def test_phi_mixing_decays(self):
        grid = Grid()
        res = phi_mixing_chain(sine_function(grid, 0.5), gaussian_noise(1.0, grid), lags=(1, 2, 3, 4), steps=0)
        self.assertTrue(res.nonincreasing())
        self.assertGreater(res.phi_operator[0], res.phi_operator[-1])
        self.assertEqual(res.phi_simulated, [0.0, 0.0, 0.0, 0.0])

    def test_phi_mixing_geometric_fit(self):
        grid = Grid()
        res = phi_mixing_chain(sine_function(grid, 0.5), gaussian_noise(1.0, grid), lags=(1, 2, 3, 4, 5, 6), steps=0)
        self.assertIsNotNone(res.fit)
        self.assertGreater(res.fit.r_squared, 0.9)
        self.assertGreater(res.fit.rho_hat, 0.0)
        self.assertLess(res.fit.rho_hat, 1.0)
        self.assertGreater(res.fit.c0_hat, 0.0)
        self.assertEqual(res.fit.points, 6)

    def test_phi_mixing_white_noise(self):
        grid = Grid()
        res = phi_mixing_chain(zero_function(grid), gaussian_noise(1.0, grid), lags=(1, 2), steps=0)
        self.assertLess(max(res.phi_operator), 1e-6)


if __name__ == "__main__":
    unittest.main()
