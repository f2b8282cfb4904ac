import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

from pyIHS.data.Sources import (
    CubeSource,
    EmpiricalSource,
    FilteredSource,
    PancakeSource,
    SphereMarginSource,
    calibrate_pancake,
    conditioned_stream,
    estimate_bias,
    export_dataset,
    make_source,
)
from pyIHS.errors import GenerationError, ParameterError, StarvationError
from pyIHS.geometry import Halfspace, TargetIntersection, sample_margin, soft_margin_estimate
from pyIHS.utils import frame_points, make_rng, read_csv


class SphereMarginSourceTestCase(unittest.TestCase):
    def setUp(self):
        self.src = SphereMarginSource(3, 2, 0.2, seed=0, pilot_size=5000)

    def test_points_on_sphere_outside_band(self):
        X, y = self.src.sample(2000)
        np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0)
        self.assertTrue(np.all(np.abs(X @ self.src.target.normals.T) >= 0.2))
        np.testing.assert_array_equal(y, self.src.target.evaluate(X))
        self.assertGreaterEqual(sample_margin(self.src.target, X), 0.2)

    def test_balance(self):
        p_plus, p_minus = estimate_bias(self.src, 5000)
        self.assertAlmostEqual(p_plus, 0.5, delta=0.07)
        self.assertAlmostEqual(p_plus + p_minus, 1.0)

    def test_same_seed_same_stream(self):
        other = SphereMarginSource(3, 2, 0.2, seed=0, pilot_size=5000)
        np.testing.assert_array_equal(self.src.sample(50)[0], other.sample(50)[0])

    def test_spawned_streams_differ(self):
        a = self.src.spawn(1).sample(20)[0]
        b = self.src.spawn(2).sample(20)[0]
        self.assertFalse(np.array_equal(a, b))
        np.testing.assert_array_equal(a, self.src.spawn(1).sample(20)[0])

    def test_draws_include_children(self):
        self.src.sample(10)
        self.src.spawn(4).sample(5)
        self.assertEqual(self.src.draws, 15)

    def test_one_sided_keeps_positive_band(self):
        src = SphereMarginSource(2, 1, 0.3, seed=1, balance=None, one_sided=True, pilot_size=5000)
        X, y = src.sample(3000)
        slack = (X @ src.target.normals.T)[:, 0]
        self.assertTrue(np.all(slack[y == -1] <= -0.3))
        self.assertTrue(np.any((slack > 0.0) & (slack < 0.3)))

    def test_invalid_rho(self):
        with self.assertRaises(ParameterError):
            SphereMarginSource(3, 2, 0.5, seed=0)

    def test_unreachable_balance(self):
        # two halfspaces through the origin never hold 95% of the sphere
        with self.assertRaises(GenerationError):
            SphereMarginSource(3, 2, 0.1, seed=0, balance=0.95, retry_budget=3, pilot_size=1000)

    def test_record(self):
        record = self.src.to_record()
        self.assertEqual(record["kind"], "sphere")
        self.assertEqual(record["target"]["k"], 2)
        self.assertEqual(record["params"]["rho"], 0.2)

    def test_draw_rounds_capped(self):
        with patch("pyIHS.data.Sources.MAX_DRAW_ROUNDS", 3), \
                patch.object(self.src, "_keep", side_effect=lambda target, X: X[:0]):
            with self.assertRaises(GenerationError):
                self.src.sample(10)


class CubeSourceTestCase(unittest.TestCase):
    def test_margin_floor(self):
        src = CubeSource(5, 2, 3, seed=2)
        X, _ = src.sample(2000)
        self.assertTrue(np.all(np.abs(X) == 1.0))
        self.assertEqual(src.radius, np.sqrt(5))
        self.assertGreaterEqual(sample_margin(src.target, X), src.margin_floor - 1e-12)
        self.assertAlmostEqual(src.margin_floor, 1.0 / 30.0)

    def test_half_integer_thresholds(self):
        src = CubeSource(4, 3, 2, seed=3)
        np.testing.assert_array_equal(src.integer_thresholds % 1.0, 0.5)
        self.assertTrue(np.all(np.abs(src.integer_weights) <= 2))
        self.assertIn("integer_weights", src.to_record())

    def test_invalid_weight_bound(self):
        with self.assertRaises(ParameterError):
            CubeSource(4, 2, 0, seed=0)

    def test_same_seed_same_bytes(self):
        X_a, y_a = CubeSource(6, 2, 2, seed=4).sample(1000)
        X_b, y_b = CubeSource(6, 2, 2, seed=4).sample(1000)
        self.assertEqual(X_a.tobytes(), X_b.tobytes())
        self.assertEqual(y_a.tobytes(), y_b.tobytes())


class PancakeSourceTestCase(unittest.TestCase):
    def test_points_within_radius(self):
        src = PancakeSource(3, 0.4, 0.05, seed=4, pilot_size=5000)
        X, _ = src.sample(3000)
        self.assertTrue(np.all(np.linalg.norm(X, axis=1) <= src.radius))

    def test_band_mass_shrinks_with_gap(self):
        narrow = PancakeSource(3, 0.1, 0.05, seed=4, pilot_size=5000)
        wide = PancakeSource(3, 0.6, 0.05, seed=4, pilot_size=5000)
        self.assertGreater(narrow.band_mass(0.05), wide.band_mass(0.05))

    def test_band_mass_matches_draws(self):
        src = PancakeSource(3, 0.2, 0.1, seed=5, pilot_size=5000)
        X, _ = src.sample(20000)
        self.assertAlmostEqual(soft_margin_estimate(src.target, X, 0.05), src.band_mass(0.05), delta=0.01)

    def test_calibrated_band_mass(self):
        src = calibrate_pancake(3, 0.05, 0.05, 0.1, seed=6, pilot_size=5000)
        self.assertAlmostEqual(src.band_mass(0.05), 0.05, places=6)

    def test_unreachable_band_mass(self):
        with self.assertRaises(ParameterError):
            calibrate_pancake(3, 0.6, 0.05, 0.1, seed=6, pilot_size=1000)


class FilteredSourceTestCase(unittest.TestCase):
    def setUp(self):
        self.src = SphereMarginSource(2, 1, 0.2, seed=7, pilot_size=5000)

    def test_conditioned_labels(self):
        X, y = conditioned_stream(self.src, +1).sample(500)
        self.assertEqual(X.shape, (500, 2))
        self.assertTrue(np.all(y == 1))
        self.assertTrue(np.all(self.src.target.evaluate(X) == 1))

    def test_buffered_surplus(self):
        stream = conditioned_stream(self.src, -1)
        first, _ = stream.sample(3)
        second, _ = stream.sample(3)
        self.assertFalse(np.array_equal(first, second))
        self.assertGreater(stream.acceptance_rate, 0.3)

    def test_starvation(self):
        never = FilteredSource(self.src, lambda X, y: np.zeros(X.shape[0], dtype=bool), budget=500)
        with self.assertRaises(StarvationError) as ctx:
            never.sample(1)
        self.assertGreaterEqual(ctx.exception.rejections, 500)

    def test_invalid_label(self):
        with self.assertRaises(ParameterError):
            conditioned_stream(self.src, 0)


class EmpiricalSourceTestCase(unittest.TestCase):
    def setUp(self):
        self.target = TargetIntersection((Halfspace(np.array([1.0, 0.0]), 0.0),), 1.0)
        self.X = make_rng(8).uniform(-0.5, 0.5, size=(10, 2))
        self.y = np.array([1, -1] * 5)

    def test_labels_come_from_sample(self):
        src = EmpiricalSource(self.X, self.y, self.target, seed=0)
        X, y = src.sample(100)
        for x, label in zip(X, y):
            index = int(np.flatnonzero(np.all(self.X == x, axis=1))[0])
            self.assertEqual(label, self.y[index])

    def test_weights(self):
        weights = np.zeros(10)
        weights[3] = 2.0
        X, _ = EmpiricalSource(self.X, self.y, self.target, seed=0, weights=weights).sample(20)
        np.testing.assert_array_equal(X, np.tile(self.X[3], (20, 1)))

    def test_invalid_weights(self):
        with self.assertRaises(ParameterError):
            EmpiricalSource(self.X, self.y, self.target, seed=0, weights=np.zeros(10))

    def test_bias_of_constant_labels(self):
        src = EmpiricalSource(self.X, np.ones(10, dtype=int), self.target, seed=0)
        self.assertEqual(estimate_bias(src, 500), (1.0, 0.0))
        src = EmpiricalSource(self.X, -np.ones(10, dtype=int), self.target, seed=0)
        self.assertEqual(estimate_bias(src, 500), (0.0, 1.0))


class FactoryTestCase(unittest.TestCase):
    def test_make_source(self):
        src = make_source("cube", seed=1, n=4, k=2, weight_bound=2)
        self.assertEqual(src.kind, "cube")
        with self.assertRaises(ParameterError):
            make_source("torus", seed=1)

    def test_make_calibrated_pancake(self):
        src = make_source("pancake", seed=2, n=3, sigma=0.1, eta=0.05, eta_rho=0.05, gap=None, pilot_size=5000)
        self.assertAlmostEqual(src.band_mass(0.05), 0.05, places=6)

    def test_export_dataset(self):
        src = SphereMarginSource(2, 1, 0.2, seed=9, pilot_size=5000)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "dataset.csv")
            df = export_dataset(src, 25, path, config={"source": {"kind": "sphere"}})
            X, y = frame_points(read_csv(path))
        self.assertEqual(len(df), 25)
        np.testing.assert_array_equal(y, src.target.evaluate(X))


if __name__ == '__main__':
    unittest.main()
