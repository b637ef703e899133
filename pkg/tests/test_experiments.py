#!/usr/bin/env python3
"""
Tests for the experiment registry, config merging, runs and the command line.
"""

import contextlib
import io
import json
import os
import shutil
import sys
import tempfile
import unittest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cli_runner import EXIT_CONFIG, EXIT_PASS, main
from experiments import experiment_registry, run
from reporting import ResultsJournal
from schemas.experiment_schema import ExperimentConfig
from utils.errors import ConfigurationError
from utils.file_utils import read_csv, read_json


def _quiet(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


class TestRegistry(unittest.TestCase):
    """Named experiments and their configs."""

    def test_names_in_order(self):
        names = [e["name"] for e in experiment_registry.list_experiments()]
        self.assertEqual(len(names), 13)
        for name in ("hellinger-sweep", "coupling-gap", "lemma-suite", "exp-inequality"):
            self.assertIn(name, names)
        self.assertLess(names.index("coupling-gap"), names.index("hellinger-sweep"))
        self.assertEqual(names[-1], "lemma-suite")

    def test_defaults_applied(self):
        config = experiment_registry.build_config("hellinger-sweep")
        self.assertEqual(config.sweep, [256, 1024, 4096])
        self.assertEqual(config.j_star, 4)
        self.assertEqual(config.sizes, [256, 1024, 4096])

    def test_merge_order(self):
        config = experiment_registry.build_config(
            "mixing-tail",
            file_values={"reps": 300, "c_lambda": 1.5, "params": {"m": 256}},
            overrides={"reps": 400, "seed": None},
        )
        self.assertEqual(config.reps, 400)
        self.assertEqual(config.c_lambda, 1.5)
        self.assertEqual(config.param("m"), 256)
        self.assertEqual(config.param("depth"), 3)
        self.assertNotEqual(config.seed, None)

    def test_invalid_value(self):
        with self.assertRaises(ConfigurationError):
            experiment_registry.build_config("coupling-gap", overrides={"reps": 0})
        with self.assertRaises(ConfigurationError):
            experiment_registry.build_config("coupling-gap", overrides={"A": 1.0, "B": -1.0})
        with self.assertRaises(ConfigurationError):
            experiment_registry.build_config("coupling-gap", overrides={"design": "grid"})

    def test_unknown_experiment(self):
        with self.assertRaises(ConfigurationError):
            experiment_registry.build_config("nope")

    def test_build_context(self):
        config = ExperimentConfig(experiment="lemma61-sweep", n=1000)
        ctx = config.build_context()
        self.assertAlmostEqual(ctx.pf.gamma_n, 0.1186, places=4)
        self.assertAlmostEqual(ctx.noise_p.fisher_info, 1.0)

    def test_center_outside_class(self):
        config = ExperimentConfig(experiment="lemma61-sweep", f0={"family": "constant", "value": 2.0})
        with self.assertRaises(ConfigurationError):
            config.build_context()


class TestRun(unittest.TestCase):
    """End-to-end runs of a cheap experiment."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def _config(self, out_dir):
        return experiment_registry.build_config("exp-inequality", overrides={"reps": 500, "seed": 7,
                                                                             "out_dir": out_dir})

    def test_artifacts_and_journal(self):
        outcome = run(self._config(self.temp_dir))
        self.assertTrue(outcome.passed)
        run_dir = os.path.join(self.temp_dir, "exp-inequality")
        for name in ("config.json", "results.csv", "summary.json", "exp_inequality.json"):
            self.assertTrue(os.path.exists(os.path.join(run_dir, name)), name)
        rows = read_csv(os.path.join(run_dir, "results.csv"))
        self.assertEqual(len(rows), 4)
        self.assertTrue(rows[0]["experiment"].startswith("exp-inequality["))
        summary = read_json(os.path.join(run_dir, "summary.json"))
        self.assertTrue(summary["passed"])
        self.assertIn("exp_inequality.json", summary["artifacts"])

        journal = ResultsJournal(self.temp_dir)
        self.assertTrue(journal.verify_chain()["valid"])
        actions = [r["action"] for r in journal.get_records()]
        self.assertEqual(actions[0], "start")
        self.assertEqual(actions[-1], "finish")
        self.assertEqual(actions.count("result"), 4)

    def test_rerun_is_byte_identical(self):
        first = os.path.join(self.temp_dir, "first")
        second = os.path.join(self.temp_dir, "second")
        run(self._config(first))
        run(self._config(second))
        for name in ("results.csv", "exp_inequality.json"):
            with open(os.path.join(first, "exp-inequality", name), "rb") as a, \
                    open(os.path.join(second, "exp-inequality", name), "rb") as b:
                self.assertEqual(a.read(), b.read(), name)

    def test_hellinger_validation_deterministic(self):
        overrides = {"reps": 200, "seed": 3, "params": {"mus": [0.5]}}
        first = run(experiment_registry.build_config(
            "hellinger-validation", overrides={**overrides, "out_dir": os.path.join(self.temp_dir, "a")}))
        second = run(experiment_registry.build_config(
            "hellinger-validation", overrides={**overrides, "out_dir": os.path.join(self.temp_dir, "b")}))
        self.assertEqual(len(first.rows), 1)
        self.assertEqual(first.rows[0].estimate, second.rows[0].estimate)
        self.assertEqual(first.rows[0].threshold, second.rows[0].threshold)

    def test_berbee_reports_geometric_fit(self):
        config = experiment_registry.build_config(
            "berbee-coupling", overrides={"seed": 3, "out_dir": self.temp_dir,
                                          "params": {"draws": 2000, "chain_steps": 0}})
        outcome = run(config)
        rows = {r.experiment: r for r in outcome.rows}
        fit_row = rows["berbee-coupling[geometric_fit_r2]"]
        self.assertTrue(fit_row.holds)
        self.assertEqual(fit_row.threshold, 0.9)
        self.assertGreater(fit_row.estimate, 0.9)
        self.assertLess(outcome.summary["mixing"]["rho_hat"], 1.0)
        self.assertGreater(outcome.summary["mixing"]["c0_hat"], 0.0)


class TestCli(unittest.TestCase):
    """Exit codes and output of the command line."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_list(self):
        code, out, _ = _quiet(["list"])
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("coupling-gap", out)

    def test_list_json(self):
        code, out, _ = _quiet(["list", "--output-format", "json"])
        self.assertEqual(code, EXIT_PASS)
        self.assertEqual(len(json.loads(out)), 13)

    def test_show_config(self):
        code, out, _ = _quiet(["show-config", "hellinger-sweep", "--reps", "50"])
        self.assertEqual(code, EXIT_PASS)
        payload = json.loads(out)
        self.assertEqual(payload["reps"], 50)
        self.assertEqual(payload["experiment"], "hellinger-sweep")

    def test_unknown_experiment(self):
        code, _, err = _quiet(["show-config", "nope"])
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("nope", err)

    def test_bad_reps(self):
        code, _, _ = _quiet(["show-config", "coupling-gap", "--reps", "0"])
        self.assertEqual(code, EXIT_CONFIG)

    def test_config_file_keyed_by_name(self):
        path = os.path.join(self.temp_dir, "configs.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"mixing-tail": {"reps": 321}, "coupling-gap": {"reps": 5}}, f)
        code, out, _ = _quiet(["show-config", "mixing-tail", "--config", path])
        self.assertEqual(code, EXIT_PASS)
        self.assertEqual(json.loads(out)["reps"], 321)

    def test_missing_config_file(self):
        code, _, _ = _quiet(["show-config", "mixing-tail", "--config", os.path.join(self.temp_dir, "none.json")])
        self.assertEqual(code, EXIT_CONFIG)

    def test_validate(self):
        code, out, _ = _quiet(["validate", "lemma61-sweep"])
        self.assertEqual(code, EXIT_PASS)
        self.assertIn("lemma61-sweep: ok", out)

    def test_run(self):
        code, out, _ = _quiet(["run", "exp-inequality", "--reps", "300", "--seed", "5",
                               "--out-dir", self.temp_dir, "--output-format", "csv"])
        self.assertEqual(code, EXIT_PASS)
        self.assertTrue(out.startswith("experiment,n,reps"))


if __name__ == "__main__":
    unittest.main()
