import json
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

from pyIHS.errors import AcceptanceError, ConfigError, InputError
from pyIHS.harness.Config import resolve_config
from pyIHS.harness.runner import load_hypothesis, run_experiment
from pyIHS.utils import read_csv

SMALL_LEARNER = {
    "source.n": 2, "source.k": 1, "source.rho": 0.2,
    "learner.epsilon": 0.1, "learner.gamma": 0.2, "learner.m_minus": 10, "learner.m_plus": 200,
    "learner.attempt_budget": 10, "sampler.steps_per_sample": 40, "experiment.holdout_size": 2000,
}


class GenTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_gen_artifacts(self):
        cfg = resolve_config(kind="gen", preset="hard-margin", seed=3, out_dir=self.tmp.name,
                             overrides={"output.dataset_size": 200})
        metrics, artifacts = run_experiment(cfg)
        self.assertEqual(set(artifacts), {"dataset.csv", "target.json", "metrics.json", "timing.json"})
        df = read_csv(artifacts["dataset.csv"])
        self.assertEqual(list(df.columns), ["x0", "x1", "x2", "label"])
        self.assertEqual(len(df), 200)
        with open(artifacts["dataset.csv"]) as f:
            self.assertTrue(f.readline().startswith("# config: "))
        with open(artifacts["target.json"]) as f:
            target = json.load(f)
        self.assertEqual(target["target"]["k"], 2)
        self.assertIn("config", target)
        self.assertGreaterEqual(metrics.extra["sample_margin"], 0.2)
        self.assertEqual(metrics.samples_consumed, 200)

    def test_gen_is_deterministic(self):
        cfg = resolve_config(kind="gen", preset="hard-margin", seed=5, out_dir=self.tmp.name,
                             overrides={"output.dataset_size": 100})
        contents = []
        for _ in range(2):
            _, artifacts = run_experiment(cfg)
            with open(artifacts["dataset.csv"], 'rb') as f, open(artifacts["metrics.json"], 'rb') as g:
                contents.append((f.read(), g.read()))
        self.assertEqual(contents[0], contents[1])


class SampleDiagTestCase(unittest.TestCase):
    def test_samples_are_inside(self):
        with tempfile.TemporaryDirectory() as tmp:
            overrides = dict(SMALL_LEARNER, **{"output.diag_samples": 50, "learner.m_plus": 100})
            cfg = resolve_config(kind="sample-diag", seed=1, out_dir=tmp, overrides=overrides)
            metrics, artifacts = run_experiment(cfg)
            df = read_csv(artifacts["samples.csv"])
        self.assertEqual(len(df), 50)
        self.assertEqual(list(df.columns), ["sample", "w0", "w1", "w2", "w3", "min_slack"])
        self.assertTrue(np.all(df["min_slack"] >= 0.0))
        self.assertEqual(metrics.extra["constraints"], 110)


class LearnAndEvalTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_cover_then_eval(self):
        learn_dir = os.path.join(self.tmp.name, "learn")
        cfg = resolve_config(kind="learn-cover", seed=2, out_dir=learn_dir, overrides=SMALL_LEARNER)
        metrics, artifacts = run_experiment(cfg)
        for name in ("params.jsonl", "rounds.jsonl", "predictions.csv", "hypothesis.json", "metrics.json"):
            self.assertTrue(os.path.exists(artifacts[name]))
        self.assertIn(metrics.tag, ("ret-good", "ret-bad", "constant"))
        with open(artifacts["metrics.json"]) as f:
            record = json.load(f)
        self.assertNotIn("wall_time", record)
        self.assertEqual(record["config"]["learner"]["m_plus"], 200)
        with open(artifacts["timing.json"]) as f:
            timing = json.load(f)
        self.assertGreater(timing["wall_time"], 0.0)
        self.assertEqual(timing["config"], record["config"])
        with open(artifacts["rounds.jsonl"]) as f:
            rounds = [json.loads(line) for line in f if line.strip()]
        self.assertGreater(len(rounds), 0)
        for entry in rounds:
            self.assertEqual(entry["config"], record["config"])

        # scoring the learner's own predictions table reproduces its error
        eval_cfg = resolve_config(kind="eval", out_dir=os.path.join(self.tmp.name, "eval"),
                                  overrides={"output.hypothesis": artifacts["hypothesis.json"],
                                             "output.dataset": artifacts["predictions.csv"]})
        eval_metrics, _ = run_experiment(eval_cfg)
        self.assertEqual(eval_metrics.total_error, metrics.total_error)
        self.assertEqual(eval_metrics.extra["rows"], 2000)

    def test_eval_needs_inputs(self):
        cfg = resolve_config(kind="eval", out_dir=self.tmp.name)
        with self.assertRaises(ConfigError):
            run_experiment(cfg)

    def test_eval_unreadable_hypothesis(self):
        cfg = resolve_config(kind="eval", out_dir=self.tmp.name,
                             overrides={"output.hypothesis": os.path.join(self.tmp.name, "missing.json"),
                                        "output.dataset": os.path.join(self.tmp.name, "missing.csv")})
        with self.assertRaises(InputError):
            run_experiment(cfg)


class LoadHypothesisTestCase(unittest.TestCase):
    def test_constant(self):
        h = load_hypothesis({"kind": "constant", "label": -1, "n": 2})
        np.testing.assert_array_equal(h.predict(np.zeros((2, 2))), [-1, -1])

    def test_boost(self):
        record = {"kind": "boost", "n": 2, "rounds": [
            {"abstaining": False, "alpha": 0.5, "hypothesis": {"kind": "constant", "label": 1, "n": 2}},
            {"abstaining": True, "alpha": 1.0, "hypothesis": {"w": [1.0, 0.0, 0.0, 0.0], "R": 1.0}},
        ]}
        h = load_hypothesis(record)
        # the abstaining voter only speaks where x0 < 0
        np.testing.assert_array_equal(h.predict(np.array([[0.5, 0.0], [-0.5, 0.0]])), [1, -1])

    def test_unknown_kind(self):
        with self.assertRaises(InputError):
            load_hypothesis({"kind": "forest"})


class PaperCheckRunTestCase(unittest.TestCase):
    def test_failed_criterion_raises(self):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = resolve_config(kind="paper-check", out_dir=tmp, overrides={"experiment.criteria": "3"})
            with patch("pyIHS.learner.GOOD_THRESHOLD_FACTOR", 99):
                with self.assertRaises(AcceptanceError) as ctx:
                    run_experiment(cfg)
            self.assertEqual(ctx.exception.exit_code, 5)
            self.assertTrue(os.path.exists(os.path.join(tmp, "criteria.json")))


if __name__ == '__main__':
    unittest.main()
