"""Finding good halfspaces: parameter schedule, the weak learner and the region learner."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data.Sources import FilteredSource, LabeledSource, conditioned_stream
from .errors import InfeasibleError, InputError, ParameterError, StarvationError, ThinBodyError
from .geometry import Halfspace, lift_halfspace, lift_points
from .logger import CustomLogger
from .sampler import ConsistencyPolytope, WalkConfig, find_interior, membership, min_slack, sample_uniform
from .utils import derive_seed

logger: logging.Logger = CustomLogger().get_logger()

GOOD_THRESHOLD_FACTOR = 100
HITTING_SET_FACTOR = 32
CHECK_SIZE_FACTOR = 50
INTERIOR_SLACK_FACTOR = 0.01
MAX_TRAINING_SIZE = 10 ** 8


def _ceil_power(scale: Fraction, exponent: float) -> int:
    """ceil(scale * 2^exponent) computed exactly for rational scale."""
    whole = math.floor(exponent)
    value = scale * Fraction(2) ** whole * Fraction(2.0 ** (exponent - whole))
    return int(math.ceil(value))


@dataclass
class WeakParams:
    """
    Sample sizes of the weak learner, exact values next to the effective ones.

    The exact M+ is astronomically large outside toy dimensions; runs set
    ``m_plus_override`` (and usually ``m_minus_override``) and every report
    records both.
    """

    n: int
    k: int
    rho: float
    epsilon: float
    log_margin: float
    log_accuracy: float
    m_minus_exact: float
    m_minus_formula: int
    exponent: float
    m_plus_formula: int
    good_threshold: float
    m_minus_override: Optional[int] = None
    m_plus_override: Optional[int] = None

    @property
    def m_minus(self) -> int:
        return self.m_minus_formula if self.m_minus_override is None else self.m_minus_override

    @property
    def m_plus(self) -> int:
        return self.m_plus_formula if self.m_plus_override is None else self.m_plus_override

    @property
    def effective_good_threshold(self) -> float:
        """(100 n / eps^2) log2(M+) / M+ at the effective M+."""
        return good_threshold_for(self.n, self.epsilon, self.m_plus)

    @property
    def success_floor(self) -> float:
        """2^-sqrt(n log2(9/rho) log2(2k/eps)), the per-attempt success floor."""
        return 2.0 ** -self.exponent

    @property
    def attempt_budget(self) -> int:
        """ceil(n 2^(3 sqrt(n log2(9/rho) log2 k))), the repetition count of the weak-learning argument."""
        e = 3.0 * math.sqrt(self.n * self.log_margin * math.log2(self.k)) if self.k > 1 else 0.0
        return _ceil_power(Fraction(self.n), e)

    def with_overrides(self, m_minus: Optional[int] = None, m_plus: Optional[int] = None) -> "WeakParams":
        for name, value in (("m_minus", m_minus), ("m_plus", m_plus)):
            if value is not None and (int(value) != value or value < 1):
                raise ParameterError(f"{name} override must be a positive integer, got {value}")
        params = replace(self,
                         m_minus_override=None if m_minus is None else int(m_minus),
                         m_plus_override=None if m_plus is None else int(m_plus))
        if params.m_plus_override is not None and params.m_plus_override < params.m_plus_formula:
            logger.warning("M+ override %d is below the exact value (2^%.1f)", params.m_plus_override,
                           math.log2(params.m_plus_formula))
        return params

    def to_record(self) -> Dict:
        return {
            "n": self.n,
            "k": self.k,
            "rho": self.rho,
            "epsilon": self.epsilon,
            "m_minus_exact": self.m_minus_exact,
            "m_minus_formula": self.m_minus_formula,
            "m_plus_formula": str(self.m_plus_formula),
            "log2_m_plus_formula": math.log2(self.m_plus_formula),
            "exponent": self.exponent,
            "good_threshold": self.good_threshold,
            "m_minus_override": self.m_minus_override,
            "m_plus_override": self.m_plus_override,
            "m_minus": self.m_minus,
            "m_plus": self.m_plus,
            "effective_good_threshold": self.effective_good_threshold,
            "success_floor": self.success_floor,
        }


def good_threshold_for(n: int, epsilon: float, m_plus: int) -> float:
    return (GOOD_THRESHOLD_FACTOR * n / epsilon ** 2) * math.log2(m_plus) / m_plus


def compute_params(n: int, k: int, rho: float, epsilon: float, m_minus: Optional[int] = None,
                   m_plus: Optional[int] = None) -> WeakParams:
    """
    Exact weak-learner sample sizes for (n, k, rho, epsilon), base-2 logarithms.

    M- = ceil(sqrt(n log2(9/rho) / log2(2k/eps))), clamped to at least 1;
    M+ = ceil((200 k n^2 M- / eps^4)^2 2^sqrt(n log2(9/rho) log2(2k/eps))) using the
    unrounded M-; M+ is then monotone in n, k, 1/rho and 1/eps.

    Raises
    ------
    ParameterError
        Raised when n or k is below 1, rho is outside (0, 9), epsilon is not
        positive or 2k/epsilon <= 1.
    """
    if int(n) != n or int(k) != k or n < 1 or k < 1:
        raise ParameterError(f"n and k must be positive integers, got n={n}, k={k}")
    if not 0.0 < rho < 9.0:
        raise ParameterError(f"rho must lie in (0, 9) for log2(9/rho) > 0, got {rho}")
    if not epsilon > 0.0 or 2.0 * k / epsilon <= 1.0:
        raise ParameterError(f"epsilon must be positive with 2k/epsilon > 1, got {epsilon}")
    n, k = int(n), int(k)
    log_margin = math.log2(9.0 / rho)
    log_accuracy = math.log2(2.0 * k / epsilon)
    m_minus_exact = math.sqrt(n * log_margin / log_accuracy)
    m_minus_formula = max(1, int(math.ceil(m_minus_exact)))
    exponent = math.sqrt(n * log_margin * log_accuracy)
    # unrounded M-: its ceiling drops as k grows, which would make M+ non-monotone in k
    scale = (Fraction(200 * k * n * n) * Fraction(m_minus_exact) / Fraction(epsilon) ** 4) ** 2
    m_plus_formula = _ceil_power(scale, exponent)
    params = WeakParams(
        n=n, k=k, rho=float(rho), epsilon=float(epsilon),
        log_margin=log_margin, log_accuracy=log_accuracy,
        m_minus_exact=m_minus_exact, m_minus_formula=m_minus_formula,
        exponent=exponent, m_plus_formula=m_plus_formula,
        good_threshold=good_threshold_for(n, epsilon, m_plus_formula),
    )
    if m_minus is not None or m_plus is not None:
        params = params.with_overrides(m_minus, m_plus)
    return params


@dataclass(frozen=True, eq=False)
class HalfspaceHypothesis:
    """Lifted halfspace h(x) = sign(w . lift(x)) with sign(0) = +1."""

    w: np.ndarray
    radius: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.shape[0] < 3:
            raise InputError(f"lifted normal must be a vector of dimension n + 2, got shape {w.shape}")
        if float(w @ w) > 1.0 + 1e-9:
            raise InputError("lifted normal must lie in the unit ball")
        object.__setattr__(self, 'w', w)
        object.__setattr__(self, 'radius', float(self.radius))

    @property
    def n(self) -> int:
        return int(self.w.shape[0]) - 2

    @classmethod
    def from_halfspace(cls, h: Halfspace, R: float) -> "HalfspaceHypothesis":
        return cls(lift_halfspace(h, R).w_prime, R)

    def scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise InputError(f"expected points of dimension {self.n}, got shape {X.shape}")
        return lift_points(X, self.radius) @ self.w

    def predict(self, X) -> np.ndarray:
        return np.where(self.scores(X) >= 0.0, 1, -1)

    def to_record(self) -> Dict:
        return {"w": [float(v) for v in self.w], "R": self.radius}

    @classmethod
    def from_record(cls, record: Dict) -> "HalfspaceHypothesis":
        try:
            return cls(np.array(record["w"], dtype=float), float(record["R"]))
        except KeyError as e:
            raise InputError(f"hypothesis record is missing field {e}") from e


@dataclass
class AttemptResult:
    """One run of the weak learner: a hypothesis, or the reason the attempt failed."""

    seed: int
    hypothesis: Optional[HalfspaceHypothesis] = None
    failure: Optional[str] = None
    m_minus: int = 0
    m_plus: int = 0
    interior_slack: float = float('nan')
    positives: np.ndarray = field(default=None, repr=False)
    negatives: np.ndarray = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.hypothesis is not None

    def to_record(self) -> Dict:
        return {
            "seed": self.seed,
            "ok": self.ok,
            "failure": self.failure,
            "m_minus": self.m_minus,
            "m_plus": self.m_plus,
            "interior_slack": self.interior_slack,
            "hypothesis": self.hypothesis.to_record() if self.ok else None,
        }


def find_good_halfspace(src: LabeledSource, params: WeakParams, walk: WalkConfig, seed: int,
                        interior_slack: Optional[float] = None) -> AttemptResult:
    """
    One attempt of the weak learner in the lifted space.

    Draws M- negatives and M+ positives, builds the consistency polytope,
    finds an interior point and returns sign(w . lift(x)) for a w sampled
    uniformly from the polytope. Thin or infeasible polytopes are failed
    attempts, not errors.

    Raises
    ------
    StarvationError
        Raised when one of the labels never occurs in the source.
    """
    if params.m_plus + params.m_minus > MAX_TRAINING_SIZE:
        raise ParameterError(f"training size M+ + M- = {params.m_plus + params.m_minus} is impractical; set overrides")
    child = src.spawn(seed)
    result = AttemptResult(seed=int(seed), m_minus=params.m_minus, m_plus=params.m_plus)
    N = conditioned_stream(child.spawn(0), -1).points(params.m_minus)
    P = conditioned_stream(child.spawn(1), +1).points(params.m_plus)
    result.positives, result.negatives = P, N
    R = src.radius
    H = ConsistencyPolytope(src.n + 2, lift_points(P, R), lift_points(N, R))
    target_slack = INTERIOR_SLACK_FACTOR * params.rho if interior_slack is None else interior_slack
    try:
        warm = find_interior(H, target_slack)
    except InfeasibleError as e:
        result.failure = "infeasible"
        result.interior_slack = e.best_slack
        logger.debug("Attempt %d: %s", seed, e)
        return result
    result.interior_slack = float(min_slack(H, warm))
    cfg = WalkConfig(walk.steps_per_sample, warm_start=warm, rng_seed=derive_seed(walk.rng_seed, seed))
    try:
        w = sample_uniform(H, cfg)
    except ThinBodyError as e:
        result.failure = "thin"
        logger.debug("Attempt %d: %s", seed, e)
        return result
    hypothesis = HalfspaceHypothesis(w, R)
    # a negative scoring exactly zero would be labelled +1
    if not membership(H, w) or np.any(hypothesis.predict(P) != 1) or np.any(hypothesis.predict(N) != -1):
        result.failure = "boundary"
        return result
    result.hypothesis = hypothesis
    logger.debug("Attempt %d: consistent hypothesis, interior slack %.4g", seed, result.interior_slack)
    return result


@dataclass
class GoodnessReport:
    """Empirical region properties of a hypothesis: mass of h = -1 and purity there."""

    p_neg_region: float
    p_correct_given_region: float
    samples_used: int
    passed: bool
    region_threshold: float
    purity_threshold: float
    starved: bool = False

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_record(self) -> Dict:
        return {
            "p_neg_region": self.p_neg_region,
            "p_correct_given_region": self.p_correct_given_region,
            "samples_used": self.samples_used,
            "verdict": self.verdict,
            "region_threshold": self.region_threshold,
            "purity_threshold": self.purity_threshold,
            "starved": self.starved,
        }


def min_check_size(epsilon: float, gamma: float) -> int:
    return int(math.ceil(CHECK_SIZE_FACTOR / (gamma * epsilon ** 2)))


def goodness_thresholds(epsilon: float, gamma: float, slack: Optional[float] = None) -> Tuple[float, float]:
    """(region, purity) thresholds of check_good after the estimate tolerance."""
    slack = epsilon / 3.0 if slack is None else float(slack)
    return gamma * (1.0 - slack), 1.0 - epsilon - slack


def check_good(h: HalfspaceHypothesis, src: LabeledSource, epsilon: float, gamma: float, m_check: int,
               slack: Optional[float] = None, seed: int = 0,
               rejection_budget: Optional[int] = None) -> GoodnessReport:
    """
    Check the region properties of h on fresh draws.

    Pr[h = -1] comes from m_check unconditional draws; Pr[f = -1 | h = -1] from
    ceil(gamma m_check) draws conditioned on h = -1 by rejection. Both estimates
    get the same tolerance slack, epsilon / 3 by default: the verdict is pass iff
    Pr[h = -1] >= gamma (1 - slack) and Pr[f = -1 | h = -1] >= 1 - epsilon - slack.
    The region tolerance is relative to gamma since gamma may be below slack.
    Starvation of the conditioned stream is a failed check.

    Raises
    ------
    ParameterError
        Raised when m_check < ceil(50 / (gamma epsilon^2)).
    """
    if not 0.0 < epsilon < 1.0 or not 0.0 < gamma < 1.0:
        raise ParameterError(f"epsilon and gamma must lie in (0, 1), got {epsilon}, {gamma}")
    floor = min_check_size(epsilon, gamma)
    if m_check < floor:
        raise ParameterError(f"m_check={m_check} is below the required {floor}")
    region_threshold, purity_threshold = goodness_thresholds(epsilon, gamma, slack)
    child = src.spawn(seed)
    X, _ = child.spawn(0).sample(m_check)
    p_region = float(np.mean(h.predict(X) == -1))
    m_region = max(1, int(math.ceil(gamma * m_check)))
    budget = rejection_budget if rejection_budget is not None else max(10 * m_check, 10 ** 5)
    region = FilteredSource(child.spawn(1), lambda Z, _y: h.predict(Z) == -1, budget=budget,
                            description="h = -1")
    starved = False
    try:
        _, y_region = region.sample(m_region)
        p_correct = float(np.mean(y_region == -1))
        used = m_check + region.raw_draws
    except StarvationError:
        p_correct, starved, used = float('nan'), True, m_check + region.raw_draws
    passed = (not starved) and p_region >= region_threshold and p_correct >= purity_threshold
    return GoodnessReport(p_neg_region=p_region, p_correct_given_region=p_correct, samples_used=int(used),
                          passed=bool(passed), region_threshold=region_threshold, purity_threshold=purity_threshold,
                          starved=starved)


@dataclass
class RegionResult:
    """Outcome of the region learner; ``exhausted`` when no attempt passed."""

    hypothesis: Optional[HalfspaceHypothesis]
    attempts: List[AttemptResult]
    reports: List[Optional[GoodnessReport]]

    @property
    def exhausted(self) -> bool:
        return self.hypothesis is None

    def records(self) -> List[Dict]:
        out = []
        for attempt, report in zip(self.attempts, self.reports):
            record = attempt.to_record()
            record["check"] = report.to_record() if report is not None else None
            out.append(record)
        return out


def _screen(h: HalfspaceHypothesis, src: LabeledSource, gamma: float, size: int, seed: int) -> bool:
    X, _ = src.spawn(seed).spawn(2).sample(size)
    return float(np.mean(h.predict(X) == -1)) >= 0.5 * gamma


def region_learner(src: LabeledSource, epsilon: float, rho: float, gamma: float, attempt_budget: int,
                   params: WeakParams, walk: WalkConfig, m_check: Optional[int] = None, seed: int = 0,
                   workers: int = 1, screen_size: int = 2000, slack: Optional[float] = None) -> RegionResult:
    """
    Repeat weak-learner attempts until one passes check_good.

    Attempts use split seeds; with ``workers`` > 1 they run in batches on a thread
    pool and the first passing attempt in seed order wins, so the outcome does
    not depend on the worker count. A cheap pilot estimate of Pr[h = -1] on
    ``screen_size`` draws discards hypotheses whose region is far below gamma
    before the full check.
    """
    if int(attempt_budget) != attempt_budget or attempt_budget < 1:
        raise ParameterError(f"attempt budget must be a positive integer, got {attempt_budget}")
    if workers < 1:
        raise ParameterError(f"workers must be positive, got {workers}")
    m_check = min_check_size(epsilon, gamma) if m_check is None else int(m_check)

    def attempt(i: int):
        attempt_seed = derive_seed(seed, i)
        result = find_good_halfspace(src, params, walk, attempt_seed,
                                     interior_slack=INTERIOR_SLACK_FACTOR * rho)
        if not result.ok:
            return result, None
        if screen_size and not _screen(result.hypothesis, src, gamma, screen_size, attempt_seed):
            region, purity = goodness_thresholds(epsilon, gamma, slack)
            return result, GoodnessReport(float('nan'), float('nan'), screen_size, False, region, purity)
        # the check draws from streams disjoint from the training draws
        report = check_good(result.hypothesis, src, epsilon, gamma, m_check, slack=slack,
                            seed=derive_seed(attempt_seed, 1))
        return result, report

    attempts, reports = [], []
    batch = int(workers)
    with ThreadPoolExecutor(max_workers=batch) as pool:
        for start in range(0, int(attempt_budget), batch):
            indices = range(start, min(start + batch, int(attempt_budget)))
            outcomes = list(pool.map(attempt, indices)) if batch > 1 else [attempt(i) for i in indices]
            for result, report in outcomes:
                attempts.append(result)
                reports.append(report)
                if report is not None and report.passed:
                    logger.info("Region found after %d attempt(s): Pr[h=-1]=%.4f, purity=%.4f",
                                len(attempts), report.p_neg_region, report.p_correct_given_region)
                    return RegionResult(result.hypothesis, attempts, reports)
    logger.info("Region learner exhausted %d attempts", len(attempts))
    return RegionResult(None, attempts, reports)


def hitting_set_size(vc_dim: int, epsilon: float) -> int:
    """ceil((32 / eps) d log2(1 / eps)) samples hit every eps-heavy set of a VC class."""
    if int(vc_dim) != vc_dim or vc_dim < 1:
        raise ParameterError(f"VC dimension must be a positive integer, got {vc_dim}")
    if not 0.0 < epsilon < 0.5:
        raise ParameterError(f"epsilon must lie in the open interval (0, 1/2), got {epsilon}")
    return int(math.ceil((HITTING_SET_FACTOR / epsilon) * (vc_dim * math.log2(1.0 / epsilon))))


def good_mass(w, src: LabeledSource, m: int, R: Optional[float] = None, seed: int = 0) -> float:
    """Estimate of Pr_{D-}[w . lift(x) < 0] from m negative draws."""
    if m < 1:
        raise ParameterError(f"m must be positive, got {m}")
    X = conditioned_stream(src.spawn(seed), -1).points(m)
    scores = lift_points(X, src.radius if R is None else R) @ np.asarray(w, dtype=float)
    return float(np.mean(scores < 0.0))


def is_good(w, src: LabeledSource, params: WeakParams, m: int, seed: int = 0) -> bool:
    """Membership in the good part of the positive-consistent halfspaces."""
    return good_mass(w, src, m, seed=seed) >= params.effective_good_threshold


def hitting_set_check(params: WeakParams) -> Dict:
    """
    Whether the effective M+ is a hitting set for d = n + 2 at accuracy 50 n log2(M+) / M+.

    Accuracies outside (0, 1/2) are reported as out of regime.
    """
    m_plus = params.m_plus
    accuracy = 50.0 * params.n * math.log2(m_plus) / m_plus if m_plus > 1 else float('inf')
    record = {"m_plus": m_plus, "vc_dim": params.n + 2, "accuracy": accuracy}
    if not 0.0 < accuracy < 0.5:
        record.update(required=None, meets=False)
    else:
        required = hitting_set_size(params.n + 2, accuracy)
        record.update(required=required, meets=m_plus >= required)
    return record
