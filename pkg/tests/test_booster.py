"""Tests for the covering learner and confidence-rated boosting."""

import unittest

import numpy as np

from pyIHS.booster import (
    ALL,
    NONE,
    TAG_CONSTANT,
    TAG_RET_BAD,
    TAG_RET_GOOD,
    ConstantHypothesis,
    CoverHypothesis,
    Voter,
    cover_learner,
    cover_round_bound,
    error_decomposition,
    evaluate_cover,
    weighted_boost,
)
from pyIHS.data.Sources import EmpiricalSource, SphereMarginSource
from pyIHS.errors import BoostStallError, InputError, ParameterError
from pyIHS.geometry import Halfspace, TargetIntersection
from pyIHS.learner import HalfspaceHypothesis, RegionResult
from pyIHS.utils import make_rng


def halfplane_source(seed: int = 0) -> SphereMarginSource:
    return SphereMarginSource(2, 1, 0.2, seed, pilot_size=5000)


def target_hypothesis(src) -> HalfspaceHypothesis:
    return HalfspaceHypothesis.from_halfspace(src.target.halfspaces[0], src.radius)


def labeled_cloud(negative_fraction: float, size: int = 2000, seed: int = 0) -> EmpiricalSource:
    """Points in the unit disc with labels drawn independently of position."""
    rng = make_rng(seed)
    X = rng.uniform(-0.5, 0.5, size=(size, 2))
    y = np.where(rng.random(size) < negative_fraction, -1, 1)
    target = TargetIntersection((Halfspace(np.array([1.0, 0.0]), 0.0),), 1.0)
    return EmpiricalSource(X, y, target, seed=seed)


def no_region(source, seed):
    raise AssertionError("region learner should not be called")


class TestCoverHypothesis(unittest.TestCase):
    def test_round_bound(self):
        self.assertEqual(cover_round_bound(0.1, 0.5), 7)

    def test_empty_cover_is_positive(self):
        h = CoverHypothesis((), 2, 1.0)
        np.testing.assert_array_equal(h.predict(np.zeros((3, 2))), [1, 1, 1])

    def test_none_sentinel(self):
        h = CoverHypothesis((), 2, 1.0, sentinel=NONE)
        self.assertEqual(evaluate_cover(h, [0.2, 0.3]), -1)

    def test_conjunction(self):
        src = halfplane_source()
        g = target_hypothesis(src)
        upper = HalfspaceHypothesis(np.array([0.0, 1.0, 0.0, 0.0]), 1.0)
        h = CoverHypothesis((g, upper), 2, 1.0)
        X = np.array([[0.3, 0.4], [0.3, -0.4], [-0.3, 0.4]])
        expected = np.where((g.predict(X) == 1) & (X[:, 1] >= 0.0), 1, -1)
        np.testing.assert_array_equal(h.predict(X), expected)

    def test_record(self):
        g = target_hypothesis(halfplane_source())
        record = CoverHypothesis((g,), 2, 1.0, tag=TAG_RET_BAD).to_record()
        restored = CoverHypothesis.from_record(record)
        self.assertEqual(restored.tag, TAG_RET_BAD)
        np.testing.assert_array_equal(restored.regions[0].w, g.w)

    def test_validation(self):
        with self.assertRaises(InputError):
            CoverHypothesis((), 2, 1.0, sentinel="some")
        with self.assertRaises(InputError):
            CoverHypothesis((target_hypothesis(halfplane_source()),), 3, 1.0)


class TestCoverLearner(unittest.TestCase):
    def setUp(self):
        self.src = halfplane_source()

    def test_bias_shortcut_negative(self):
        result = cover_learner(labeled_cloud(0.99), no_region, 0.05, 0.2)
        self.assertEqual(result.tag, TAG_CONSTANT)
        self.assertEqual(result.hypothesis.sentinel, NONE)

    def test_bias_shortcut_positive(self):
        result = cover_learner(labeled_cloud(0.01), no_region, 0.05, 0.2)
        self.assertEqual(result.tag, TAG_CONSTANT)
        self.assertEqual(result.hypothesis.sentinel, ALL)

    def test_single_region_cover(self):
        g = target_hypothesis(self.src)
        result = cover_learner(self.src, lambda source, seed: RegionResult(g, [], []), 0.1, 0.2, seed=1)
        self.assertEqual(result.tag, TAG_RET_GOOD)
        self.assertEqual(len(result.hypothesis.regions), 1)
        self.assertEqual(result.region_calls, 1)
        self.assertEqual(result.rounds[-1]["outcome"], "mass-below-epsilon")
        self.assertEqual(error_decomposition(result.hypothesis, self.src.spawn(9), 5000), (0.0, 0.0, 0.0))

    def test_exhausted_region_learner(self):
        result = cover_learner(self.src, lambda source, seed: RegionResult(None, [], []), 0.1, 0.2)
        self.assertEqual(result.tag, TAG_RET_BAD)
        self.assertEqual(result.rounds[0]["outcome"], "exhausted")
        self.assertEqual(len(result.hypothesis.regions), 0)

    def test_failed_recheck(self):
        g = target_hypothesis(self.src)
        flipped = HalfspaceHypothesis(-g.w, g.radius)
        result = cover_learner(self.src, lambda source, seed: RegionResult(flipped, [], []), 0.1, 0.2)
        self.assertEqual(result.tag, TAG_RET_BAD)
        self.assertEqual(result.rounds[0]["outcome"], "recheck-failed")

    def test_cover_mass_shrinks_by_round(self):
        src = SphereMarginSource(2, 2, 0.2, seed=3, balance=0.4, pilot_size=5000)
        supply = iter([HalfspaceHypothesis.from_halfspace(h, src.radius) for h in src.target.halfspaces])
        result = cover_learner(src, lambda source, seed: RegionResult(next(supply), [], []), 0.05, 0.1, seed=2)
        self.assertEqual(result.tag, TAG_RET_GOOD)
        self.assertEqual(len(result.hypothesis.regions), 2)
        estimates = [record["p_region"] for record in result.rounds]
        for before, after in zip(estimates, estimates[1:]):
            self.assertLessEqual(after, before + 0.02)
        X, _ = src.spawn(7).sample(5000)
        masses = [float(np.mean(CoverHypothesis(result.hypothesis.regions[:t], 2, src.radius).predict(X) == 1))
                  for t in range(3)]
        self.assertEqual(masses, sorted(masses, reverse=True))
        self.assertLess(masses[2], masses[1])

    def test_parameter_domain(self):
        with self.assertRaises(ParameterError):
            cover_learner(self.src, no_region, 0.5, 0.2)
        with self.assertRaises(ParameterError):
            cover_learner(self.src, no_region, 0.1, 1.0)


class TestWeightedBoost(unittest.TestCase):
    def test_region_voter_converges(self):
        src = halfplane_source()
        g = target_hypothesis(src)
        result = weighted_boost(src, lambda source, seed: g, 0.05, 0.1, rounds_budget=5,
                                sample_size=1000, holdout_size=1000)
        self.assertTrue(result.converged)
        self.assertEqual(len(result.rounds), 1)
        self.assertTrue(result.rounds[0]["abstaining"])
        self.assertEqual(result.holdout_error, 0.0)
        self.assertGreater(result.rounds[0]["alpha"], 0.0)

    def test_stall(self):
        with self.assertRaises(BoostStallError) as ctx:
            weighted_boost(halfplane_source(), lambda source, seed: None, 0.05, 0.1, rounds_budget=5,
                           sample_size=500, holdout_size=500)
        self.assertEqual(ctx.exception.round_reached, 0)

    def test_biased_fallback_then_rebalanced(self):
        # the constant voter rebalances the weights, so round 1 needs the weak learner
        with self.assertRaises(BoostStallError) as ctx:
            weighted_boost(labeled_cloud(0.8), lambda source, seed: None, 0.05, 0.1, rounds_budget=5,
                           sample_size=2000, holdout_size=500)
        self.assertEqual(ctx.exception.round_reached, 1)

    def test_potential_never_increases(self):
        src = SphereMarginSource(2, 2, 0.2, seed=3, balance=0.4, pilot_size=5000)
        regions = [HalfspaceHypothesis.from_halfspace(h, src.radius) for h in src.target.halfspaces]
        result = weighted_boost(src, lambda source, seed: regions[(seed // 10) % 2], 0.01, 0.1, rounds_budget=6,
                                sample_size=2000, holdout_size=1000)
        potentials = [1.0] + [record["potential"] for record in result.rounds]
        self.assertGreaterEqual(len(result.rounds), 2)
        for before, after in zip(potentials, potentials[1:]):
            self.assertLessEqual(after, before + 1e-12)
        self.assertTrue(all(record["potential_factor"] <= 1.0 + 1e-12 for record in result.rounds))

    def test_fallback_edge_on_biased_source(self):
        result = weighted_boost(labeled_cloud(0.9), no_region, 0.05, 0.1, rounds_budget=1,
                                sample_size=2000, holdout_size=500)
        first = result.rounds[0]
        self.assertTrue(first["fallback"])
        self.assertFalse(first["abstaining"])
        self.assertGreaterEqual(first["edge"], 0.35)

    def test_abstaining_vote(self):
        g = target_hypothesis(halfplane_source())
        X = np.array([[1.0, 0.0], [-1.0, 0.0]])
        votes = Voter(g, abstaining=True).vote(X)
        self.assertEqual(sorted(votes.tolist()), [-1, 0])
        np.testing.assert_array_equal(Voter(ConstantHypothesis(1, 2), abstaining=False).vote(X), [1, 1])


class TestErrorDecomposition(unittest.TestCase):
    def test_constant_hypothesis(self):
        src = halfplane_source()
        false_pos, false_neg, total = error_decomposition(ConstantHypothesis(1, 2), src, 4000)
        self.assertEqual(false_neg, 0.0)
        self.assertAlmostEqual(false_pos, 0.5, delta=0.05)
        self.assertEqual(total, false_pos)

    def test_invalid_size(self):
        with self.assertRaises(ParameterError):
            error_decomposition(ConstantHypothesis(1, 2), halfplane_source(), 0)


if __name__ == '__main__':
    unittest.main()
