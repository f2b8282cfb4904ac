"""Strong learners built from the region learner: covering and confidence-rated boosting."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data.Sources import EmpiricalSource, FilteredSource, LabeledSource
from .errors import BoostStallError, InputError, ParameterError, StarvationError
from .learner import HalfspaceHypothesis, RegionResult, check_good, min_check_size
from .logger import CustomLogger
from .utils import derive_seed, hoeffding_size

logger: logging.Logger = CustomLogger().get_logger()

ALL, NONE = "all", "none"
TAG_CONSTANT, TAG_RET_BAD, TAG_RET_GOOD = "constant", "ret-bad", "ret-good"
BIAS_SHORTCUT = 5.0
BIAS_FALLBACK = 2.0 / 3.0
FAILURE_BUDGET = 0.01

RegionFn = Callable[[LabeledSource, int], RegionResult]
WeakFn = Callable[[LabeledSource, int], Optional[object]]


def cover_round_bound(epsilon: float, gamma: float) -> int:
    """ceil(log2(1/eps) / gamma), the most regions a cover can hold."""
    return int(math.ceil(math.log2(1.0 / epsilon) / gamma))


@dataclass(frozen=True, eq=False)
class ConstantHypothesis:
    """h(x) = label everywhere."""

    label: int
    n: int

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise InputError(f"expected points of dimension {self.n}, got shape {X.shape}")
        return np.full(X.shape[0], self.label, dtype=int)

    def to_record(self) -> Dict:
        return {"kind": "constant", "label": self.label, "n": self.n}


@dataclass(frozen=True, eq=False)
class CoverHypothesis:
    """
    Conjunction g_0 and g_1 ... and g_t of lifted halfspace regions.

    g_0 is the sentinel ``"all"`` (always +1) or ``"none"`` (always -1, the
    constant -1 output of the bias shortcut).
    """

    regions: Tuple[HalfspaceHypothesis, ...]
    n: int
    radius: float
    sentinel: str = ALL
    tag: str = TAG_RET_GOOD

    def __post_init__(self):
        if self.sentinel not in (ALL, NONE):
            raise InputError(f"sentinel must be '{ALL}' or '{NONE}', got {self.sentinel}")
        regions = tuple(self.regions)
        for g in regions:
            if g.n != self.n:
                raise InputError(f"region of dimension {g.n} in a cover of dimension {self.n}")
        object.__setattr__(self, 'regions', regions)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise InputError(f"expected points of dimension {self.n}, got shape {X.shape}")
        if self.sentinel == NONE:
            return np.full(X.shape[0], -1, dtype=int)
        inside = np.ones(X.shape[0], dtype=bool)
        for g in self.regions:
            inside &= g.predict(X) == 1
        return np.where(inside, 1, -1)

    def to_record(self) -> Dict:
        return {
            "kind": "cover",
            "n": self.n,
            "k": len(self.regions),
            "R": self.radius,
            "sentinel": self.sentinel,
            "tag": self.tag,
            "rows": [{"w": [float(v) for v in g.w]} for g in self.regions],
        }

    @classmethod
    def from_record(cls, record: Dict) -> "CoverHypothesis":
        try:
            R = float(record["R"])
            regions = tuple(HalfspaceHypothesis(np.array(r["w"], dtype=float), R) for r in record["rows"])
            return cls(regions, int(record["n"]), R, sentinel=record.get("sentinel", ALL),
                       tag=record.get("tag", TAG_RET_GOOD))
        except KeyError as e:
            raise InputError(f"cover record is missing field {e}") from e


def evaluate_cover(h: CoverHypothesis, x) -> int:
    """+1 iff every region of the cover is +1 at x."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("evaluate_cover takes a single point")
    return int(h.predict(x)[0])


@dataclass
class CoverResult:
    """A cover with its termination tag and per-round reports."""

    hypothesis: CoverHypothesis
    tag: str
    rounds: List[Dict] = field(default_factory=list)
    region_calls: int = 0
    final_joint: Tuple[float, float] = (float('nan'), float('nan'))

    def to_record(self) -> Dict:
        return {
            "tag": self.tag,
            "region_count": len(self.hypothesis.regions),
            "region_calls": self.region_calls,
            "final_joint_positive": self.final_joint[0],
            "final_joint_negative": self.final_joint[1],
        }


def _conjunction(regions: Sequence[HalfspaceHypothesis]):
    frozen = tuple(regions)

    def accept(X, _y):
        inside = np.ones(X.shape[0], dtype=bool)
        for g in frozen:
            inside &= g.predict(X) == 1
        return inside
    return accept


def cover_learner(src: LabeledSource, region_fn: RegionFn, epsilon: float, gamma: float,
                  m_check: Optional[int] = None, estimate_size: Optional[int] = None, seed: int = 0,
                  rejection_budget: int = 10 ** 6) -> CoverResult:
    """
    Boost a region learner by covering.

    If the estimated Pr[f = b] is at most 5 eps the constant -b is returned.
    Otherwise regions are added while fewer than log2(1/eps)/gamma are held and
    both Pr[f = +1 and h_t = 1] and Pr[f = -1 and h_t = 1] are estimated at no
    less than eps. Each new region is rechecked on fresh draws from the current
    conditional distribution; a failed recheck or an exhausted region learner
    ends the run with tag ``ret-bad``. Estimates use Hoeffding-sized samples at
    accuracy eps/3 with a total failure budget of 0.01.

    Parameters
    ----------
    src : LabeledSource
        Example distribution D.
    region_fn : callable
        ``region_fn(source, seed)`` returning a RegionResult on that source.
    epsilon, gamma : float
        Target accuracy and region mass.
    """
    if not 0.0 < epsilon < 0.5:
        raise ParameterError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    bound = cover_round_bound(epsilon, gamma)
    checks = 2 + bound
    m_est = estimate_size or hoeffding_size(epsilon / 3.0, FAILURE_BUDGET / checks)
    m_check = m_check or min_check_size(epsilon, gamma)
    n, R = src.n, src.radius

    _, y = src.spawn(0).sample(m_est)
    p_plus = float(np.mean(y == 1))
    if p_plus <= BIAS_SHORTCUT * epsilon:
        logger.info("Pr[f=+1] ~ %.4f <= 5 eps: constant -1", p_plus)
        return CoverResult(CoverHypothesis((), n, R, sentinel=NONE, tag=TAG_CONSTANT), TAG_CONSTANT)
    if 1.0 - p_plus <= BIAS_SHORTCUT * epsilon:
        logger.info("Pr[f=-1] ~ %.4f <= 5 eps: constant +1", 1.0 - p_plus)
        return CoverResult(CoverHypothesis((), n, R, sentinel=ALL, tag=TAG_CONSTANT), TAG_CONSTANT)

    regions: List[HalfspaceHypothesis] = []
    rounds: List[Dict] = []
    calls = 0
    tag = TAG_RET_GOOD
    joint = (float('nan'), float('nan'))
    current: LabeledSource = src
    t = 0
    while t < bound:
        X, y = src.spawn(1).spawn(t).sample(m_est)
        inside = _conjunction(regions)(X, y)
        joint = (float(np.mean(inside & (y == 1))), float(np.mean(inside & (y == -1))))
        record = {"round": t, "p_region": float(np.mean(inside)),
                  "p_pos_and_region": joint[0], "p_neg_and_region": joint[1]}
        if min(joint) < epsilon:
            record["outcome"] = "mass-below-epsilon"
            rounds.append(record)
            break
        calls += 1
        try:
            result = region_fn(current, derive_seed(seed, 1, t))
        except StarvationError as e:
            logger.warning("Conditioned stream starved in round %d: %s", t, e)
            record["outcome"] = "starved"
            rounds.append(record)
            break
        record["attempts"] = len(result.attempts)
        if result.exhausted:
            record["outcome"] = "exhausted"
            rounds.append(record)
            tag = TAG_RET_BAD
            break
        report = check_good(result.hypothesis, current, epsilon, gamma, m_check, seed=derive_seed(seed, 2, t))
        record["recheck"] = report.to_record()
        if not report.passed:
            record["outcome"] = "recheck-failed"
            rounds.append(record)
            tag = TAG_RET_BAD
            break
        regions.append(result.hypothesis)
        record["outcome"] = "accepted"
        rounds.append(record)
        logger.info("Round %d: region accepted, Pr[h=-1 | D_t]=%.4f", t, report.p_neg_region)
        current = FilteredSource(src, _conjunction(regions), budget=rejection_budget,
                                 description=f"cover of {len(regions)} region(s)")
        t += 1
    hypothesis = CoverHypothesis(tuple(regions), n, R, sentinel=ALL, tag=tag)
    logger.info("Cover learner finished with %s after %d region(s)", tag, len(regions))
    return CoverResult(hypothesis, tag, rounds, calls, joint)


class Voter:
    """Confidence-rated voter: region voters say -1 inside their region and abstain elsewhere."""

    def __init__(self, hypothesis, abstaining: bool):
        self.hypothesis = hypothesis
        self.abstaining = abstaining

    def vote(self, X) -> np.ndarray:
        labels = self.hypothesis.predict(X)
        if self.abstaining:
            return np.where(labels == -1, -1, 0)
        return labels

    def to_record(self) -> Dict:
        return {"abstaining": self.abstaining, "hypothesis": self.hypothesis.to_record()}


@dataclass
class WeightedBoostHypothesis:
    """sign(sum_t alpha_t v_t(x)) with ties going to +1."""

    voters: List[Voter]
    alphas: List[float]
    n: int

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise InputError(f"expected points of dimension {self.n}, got shape {X.shape}")
        total = np.zeros(X.shape[0])
        for voter, alpha in zip(self.voters, self.alphas):
            total += alpha * voter.vote(X)
        return total

    def predict(self, X) -> np.ndarray:
        return np.where(self.score(X) >= 0.0, 1, -1)

    def to_record(self) -> Dict:
        return {"kind": "boost", "n": self.n,
                "rounds": [dict(v.to_record(), alpha=a) for v, a in zip(self.voters, self.alphas)]}


@dataclass
class BoostResult:
    hypothesis: WeightedBoostHypothesis
    rounds: List[Dict]
    converged: bool
    holdout_error: float


def weighted_boost(src: LabeledSource, weak_fn: WeakFn, epsilon: float, gamma: float, rounds_budget: int,
                   sample_size: int = 4000, holdout_size: int = 4000, resample_size: Optional[int] = None,
                   attempts_per_round: int = 3, seed: int = 0) -> BoostResult:
    """
    Boosting by resampling with abstaining confidence-rated voters.

    A training multiset S and a held-out set V are drawn once. Each round
    either falls back to the majority constant (weighted bias >= 2/3) or draws
    a resample from S under the current weights and calls ``weak_fn`` on it;
    halfspace hypotheses vote -1 on their region and abstain elsewhere. The
    vote weight is 1/2 ln(W_correct / W_wrong) on the non-abstained mass,
    smoothed by 1/(2|S|), and weights are multiplied by exp(-alpha y v(x)).
    Stops once the held-out error is at most epsilon.

    Raises
    ------
    BoostStallError
        Raised when no voter with a positive edge is found within
        ``attempts_per_round`` calls.
    """
    if rounds_budget < 1 or attempts_per_round < 1:
        raise ParameterError("rounds budget and attempts per round must be positive")
    X, y = src.spawn(0).sample(sample_size)
    X_val, y_val = src.spawn(1).sample(holdout_size)
    m = X.shape[0]
    smoothing = 1.0 / (2.0 * m)
    weights = np.full(m, 1.0 / m)
    margins = np.zeros(m)
    val_scores = np.zeros(X_val.shape[0])
    resample_size = resample_size or m
    hypothesis = WeightedBoostHypothesis([], [], src.n)
    records: List[Dict] = []
    holdout_error = float('nan')
    converged = False
    logger.info("Boosting up to %d rounds (about %d for edge %.3g)", rounds_budget,
                int(math.ceil(math.log(1.0 / epsilon) / (2.0 * gamma ** 2))), gamma)
    for t in range(rounds_budget):
        p_minus = float(weights[y == -1].sum())
        voter, edge, correct, wrong, fallback = None, 0.0, 0.0, 0.0, False
        if max(p_minus, 1.0 - p_minus) >= BIAS_FALLBACK:
            voter = Voter(ConstantHypothesis(-1 if p_minus >= 0.5 else 1, src.n), abstaining=False)
            fallback = True
        else:
            for a in range(attempts_per_round):
                resample = EmpiricalSource(X, y, src.target, seed=seed, weights=weights).spawn(t).spawn(a)
                candidate = weak_fn(resample, 10 * t + a)
                if candidate is None:
                    continue
                voter = Voter(candidate, abstaining=isinstance(candidate, HalfspaceHypothesis))
                v = voter.vote(X)
                correct = float(weights[v * y > 0].sum())
                wrong = float(weights[v * y < 0].sum())
                if correct > wrong:
                    break
                voter = None
        if voter is None:
            raise BoostStallError(f"no voter with a positive edge in round {t}", round_reached=t)
        v = voter.vote(X)
        correct = float(weights[v * y > 0].sum())
        wrong = float(weights[v * y < 0].sum())
        edge = 0.5 * (correct - wrong)
        alpha = 0.5 * math.log((correct + smoothing) / (wrong + smoothing))
        step = np.exp(-alpha * y * v)
        potential_factor = float((weights * step).sum())
        weights = weights * step / potential_factor
        margins += alpha * v
        hypothesis.voters.append(voter)
        hypothesis.alphas.append(alpha)
        val_scores += alpha * voter.vote(X_val)
        holdout_error = float(np.mean(np.where(val_scores >= 0.0, 1, -1) != y_val))
        records.append({
            "round": t,
            "fallback": fallback,
            "abstaining": voter.abstaining,
            "edge": edge,
            "alpha": alpha,
            "potential": float(np.mean(np.exp(-y * margins))),
            "potential_factor": potential_factor,
            "train_error": float(np.mean(np.where(margins >= 0.0, 1, -1) != y)),
            "holdout_error": holdout_error,
        })
        logger.info("Boost round %d: edge %.4f, alpha %.4f, held-out error %.4f", t, edge, alpha, holdout_error)
        if edge < gamma:
            logger.debug("Round %d edge %.4g is below gamma %.4g", t, edge, gamma)
        if holdout_error <= epsilon:
            converged = True
            break
    return BoostResult(hypothesis, records, converged, holdout_error)


def error_decomposition(h, src: LabeledSource, m: int) -> Tuple[float, float, float]:
    """
    Empirical (Pr[f = -1 and h = +1], Pr[f = +1 and h = -1], total) over m fresh draws.
    """
    if m < 1:
        raise ParameterError(f"m must be positive, got {m}")
    X, y = src.sample(m)
    pred = h.predict(X)
    false_pos = float(np.mean((pred == 1) & (y == -1)))
    false_neg = float(np.mean((pred == -1) & (y == 1)))
    return false_pos, false_neg, false_pos + false_neg
