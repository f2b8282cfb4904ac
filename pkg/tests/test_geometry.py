"""Tests for halfspaces, the sphere lifting and margins."""

import math
import unittest

import numpy as np

from pyIHS.errors import InputError, ParameterError
from pyIHS.geometry import (
    LIFT_LAST,
    Halfspace,
    LiftedPoint,
    TargetIntersection,
    evaluate_target,
    lift_halfspace,
    lift_point,
    lift_points,
    point_margin,
    robust_margin_witness,
    sample_margin,
    soft_margin_estimate,
    target_from_record,
    target_to_record,
)
from pyIHS.utils import make_rng


def quadrant() -> TargetIntersection:
    """x0 > 0.1 and x1 > 0 inside the unit disc."""
    return TargetIntersection((Halfspace(np.array([1.0, 0.0]), 0.1), Halfspace(np.array([0.0, 1.0]), 0.0)), 1.0)


class TestTargetIntersection(unittest.TestCase):
    def test_evaluate(self):
        f = quadrant()
        self.assertEqual(evaluate_target(f, [0.5, 0.5]), 1)
        self.assertEqual(evaluate_target(f, [0.05, 0.5]), -1)
        self.assertEqual(evaluate_target(f, [0.5, -0.5]), -1)

    def test_ties_are_negative(self):
        f = quadrant()
        self.assertEqual(evaluate_target(f, [0.1, 0.5]), -1)
        self.assertEqual(evaluate_target(f, [0.5, 0.0]), -1)

    def test_vectorised_evaluate(self):
        X = np.array([[0.5, 0.5], [0.0, 0.0], [0.9, 0.1]])
        np.testing.assert_array_equal(quadrant().evaluate(X), [1, -1, 1])

    def test_dimension_mismatch(self):
        with self.assertRaises(InputError):
            evaluate_target(quadrant(), [0.1, 0.2, 0.3])

    def test_mixed_dimensions(self):
        with self.assertRaises(InputError):
            TargetIntersection((Halfspace(np.array([1.0, 0.0]), 0.0), Halfspace(np.array([0.0, 0.0, 1.0]), 0.0)), 1.0)

    def test_threshold_outside_radius(self):
        with self.assertRaises(InputError):
            TargetIntersection((Halfspace(np.array([1.0, 0.0]), 1.5),), 1.0)

    def test_normal_renormalized(self):
        with self.assertLogs(level="WARNING"):
            h = Halfspace(np.array([2.0, 0.0]), 0.0)
        np.testing.assert_allclose(h.w, [1.0, 0.0])

    def test_record(self):
        f = quadrant()
        record = target_to_record(f)
        self.assertEqual((record["n"], record["k"], record["R"]), (2, 2, 1.0))
        g = target_from_record(record)
        np.testing.assert_array_equal(g.normals, f.normals)
        np.testing.assert_array_equal(g.thresholds, f.thresholds)

    def test_record_missing_field(self):
        with self.assertRaises(InputError):
            target_from_record({"n": 2, "k": 1})

    def test_record_header_mismatch(self):
        record = target_to_record(quadrant())
        record["k"] = 3
        with self.assertRaises(InputError):
            target_from_record(record)


class TestLifting(unittest.TestCase):
    def test_lifted_points_on_sphere(self):
        X = make_rng(1).uniform(-0.7, 0.7, size=(50, 3))
        Z = lift_points(X, 2.0)
        self.assertEqual(Z.shape, (50, 5))
        np.testing.assert_allclose(np.linalg.norm(Z, axis=1), 1.0)
        np.testing.assert_array_equal(Z[:, -1], LIFT_LAST)

    def test_boundary_point(self):
        z = lift_point([0.0, 1.0], 1.0).coords
        np.testing.assert_allclose(z, [0.0, 1.0 / math.sqrt(2.0), 0.0, LIFT_LAST])

    def test_outside_radius(self):
        with self.assertRaises(InputError):
            lift_points(np.array([[1.0, 1.0]]), 1.0)

    def test_within_radius_slack(self):
        z = lift_point([1.0 + 1e-12, 0.0], 1.0).coords
        self.assertEqual(z[-2], 0.0)

    def test_lifted_halfspace_normal(self):
        h = lift_halfspace(Halfspace(np.array([0.0, 1.0]), 0.5), 1.0)
        np.testing.assert_allclose(h.w_prime, np.array([0.0, 1.0, 0.0, -0.5]) / math.sqrt(1.25))

    def test_lifting_preserves_labels(self):
        R = 1.5
        h = Halfspace(np.array([0.6, -0.8]), 0.3)
        X = make_rng(2).uniform(-1.0, 1.0, size=(200, 2))
        Z = lift_points(X, R)
        lifted = lift_halfspace(h, R).w_prime
        original = X @ h.w - h.theta
        # w'.x' is (w.x - theta) / (sqrt2 R sqrt(1 + theta^2/R^2))
        np.testing.assert_allclose(Z @ lifted, original / (math.sqrt(2.0) * R * math.sqrt(1 + (0.3 / R) ** 2)))

    def test_lifting_halves_margin_at_worst(self):
        rng = make_rng(11)
        R = 2.0
        for _ in range(50):
            w = rng.standard_normal(3)
            h = Halfspace(w, float(rng.uniform(-R, R)))
            X = rng.standard_normal((100, 3))
            X *= (R * rng.random(100) ** (1.0 / 3.0) / np.linalg.norm(X, axis=1))[:, None]
            margin = np.abs(X @ h.w - h.theta) / R
            lifted = np.abs(lift_points(X, R) @ lift_halfspace(h, R).w_prime)
            self.assertTrue(np.all(lifted >= margin / 2.0 - 1e-12))
            self.assertTrue(np.all(lifted <= margin / math.sqrt(2.0) + 1e-12))

    def test_lifted_point_validation(self):
        with self.assertRaises(InputError):
            LiftedPoint(np.array([1.0, 0.0, 0.0]))


class TestMargins(unittest.TestCase):
    def test_point_margin(self):
        f = quadrant()
        self.assertAlmostEqual(point_margin(f, [0.5, -0.25]), 0.25)
        self.assertAlmostEqual(point_margin(f, [0.5, 0.5]), -0.4)

    def test_sample_margin(self):
        f = quadrant()
        X = np.array([[0.5, 0.5], [0.5, -0.3], [-0.2, 0.5]])
        self.assertAlmostEqual(sample_margin(f, X), 0.3)

    def test_soft_margin_estimate(self):
        f = quadrant()
        # worst slacks -0.05, -0.5, 0.3, -0.1
        X = np.array([[0.05, 0.5], [0.5, -0.5], [0.5, 0.3], [0.5, -0.1]])
        self.assertAlmostEqual(soft_margin_estimate(f, X, 0.1), 0.5)

    def test_point_margin_lipschitz(self):
        R = 2.0
        f = TargetIntersection((Halfspace(np.array([1.0, 0.0]), 0.3), Halfspace(np.array([-0.6, 0.8]), -0.5)), R)
        rng = make_rng(5)
        X = rng.uniform(-1.0, 1.0, size=(300, 2))
        Z = np.clip(X + rng.normal(scale=0.2, size=X.shape), -1.4, 1.4)
        for x, z in zip(X, Z):
            gap = abs(point_margin(f, x) - point_margin(f, z))
            self.assertLessEqual(gap, np.linalg.norm(x - z) / R + 1e-12)
            self.assertLessEqual(gap, np.linalg.norm(x - z) + 1e-12)

    def test_soft_margin_rho_domain(self):
        X = np.array([[0.5, 0.5]])
        for rho in (-0.1, 1.0, 1.5):
            with self.assertRaises(ParameterError):
                soft_margin_estimate(quadrant(), X, rho)
        self.assertEqual(soft_margin_estimate(quadrant(), X, 0.0), 0.0)

    def test_empty_sample(self):
        with self.assertRaises(InputError):
            soft_margin_estimate(quadrant(), np.empty((0, 2)), 0.1)

    def test_witness_holds_on_robust_support(self):
        f = quadrant()
        support = np.array([[0.5, 0.5], [0.5, -0.3], [-0.3, 0.5]])
        witness = robust_margin_witness(f, support, 0.3)
        self.assertTrue(witness.holds)
        self.assertEqual(witness.n_negative, 2)
        self.assertAlmostEqual(witness.bound, 0.045)

    def test_witness_lists_violators(self):
        f = quadrant()
        support = np.array([[0.5, 0.5], [0.5, -0.01], [-0.3, 0.5]])
        witness = robust_margin_witness(f, support, 0.3)
        self.assertFalse(witness.holds)
        self.assertEqual(witness.violators, [1])

    def test_witness_needs_positive(self):
        with self.assertRaises(InputError):
            robust_margin_witness(quadrant(), np.array([[-0.5, 0.5]]), 0.2)


if __name__ == '__main__':
    unittest.main()
