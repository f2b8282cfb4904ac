"""Module for seeded labeled-example sources"""

import copy
import logging
import math
import threading
from abc import ABC, abstractmethod
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from ..errors import GenerationError, ParameterError, StarvationError
from ..geometry import Halfspace, TargetIntersection, target_to_record
from ..logger import CustomLogger
from ..utils import make_rng, points_frame, random_unit_vectors, write_csv

logger: logging.Logger = CustomLogger().get_logger()

DEFAULT_REJECTION_BUDGET = 10 ** 6
MAX_BATCH = 1 << 20
MAX_DRAW_ROUNDS = 1000

# stream keys below the example stream are reserved for construction
_CONSTRUCTION_KEY = 0
_PILOT_KEY = 1
_EXAMPLE_KEY = 2

Predicate = Callable[[np.ndarray, np.ndarray], np.ndarray]


class DrawCounter:
    """Thread-safe count of examples drawn from a distribution and its children."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, m: int) -> None:
        with self._lock:
            self._count += int(m)

    @property
    def count(self) -> int:
        return self._count


class LabeledSource(ABC):
    """Abstract class for seeded streams of (point, label) pairs"""

    kind: str = "abstract"

    def __init__(self, target: TargetIntersection, seed: int, params: Dict,
                 counter: Optional[DrawCounter] = None):
        self._target: TargetIntersection = target
        self._seed: int = int(seed)
        self._params: Dict = dict(params)
        self._stream_key: Tuple[int, ...] = (_EXAMPLE_KEY,)
        self._rng: np.random.Generator = make_rng(self._seed, *self._stream_key)
        self._counter: DrawCounter = counter if counter is not None else DrawCounter()

    @property
    def target(self) -> TargetIntersection:
        return self._target

    @property
    def radius(self) -> float:
        return self._target.ambient_radius

    @property
    def n(self) -> int:
        return self._target.n

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def params(self) -> Dict:
        return dict(self._params)

    @property
    def draws(self) -> int:
        """Examples consumed from the underlying distribution, children included."""
        return self._counter.count

    @abstractmethod
    def _draw_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """Draw m i.i.d. points of the distribution"""
        raise NotImplementedError

    def _draw(self, rng: np.random.Generator, m: int) -> Tuple[np.ndarray, np.ndarray]:
        X = self._draw_points(rng, m)
        return X, self._target.evaluate(X) if m > 0 else np.empty(0, dtype=int)

    def sample(self, m: int) -> Tuple[np.ndarray, np.ndarray]:
        """Draw m labeled examples, advancing the stream."""
        m = int(m)
        if m < 0:
            raise ParameterError(f"sample size must be nonnegative, got {m}")
        if m == 0:
            return np.empty((0, self.n)), np.empty(0, dtype=int)
        X, y = self._draw(self._rng, m)
        self._counter.add(m)
        return X, y

    def spawn(self, key: int) -> "LabeledSource":
        """Independent child stream of the same distribution, keyed deterministically."""
        child = copy.copy(self)
        child._stream_key = self._stream_key + (int(key),)
        child._rng = make_rng(self._seed, *child._stream_key)
        return child

    def to_record(self) -> Dict:
        return {
            "kind": self.kind,
            "seed": self._seed,
            "params": self.params,
            "target": target_to_record(self._target),
        }


class SphereMarginSource(LabeledSource):
    """
    Uniform points on the unit sphere with the rho-band around every target hyperplane removed.

    Two-sided rejection drops any point with some |w_i . x| < rho, so both labels
    keep distance rho from every hyperplane. With ``one_sided`` only negatives
    whose worst slack lies in (-rho, 0] are dropped, which is the bare margin
    definition.
    """

    kind = "sphere"

    def __init__(self, n: int, k: int, rho: float, seed: int, balance: Optional[float] = 0.5,
                 one_sided: bool = False, retry_budget: int = 2000, balance_tolerance: float = 0.03,
                 pilot_size: int = 20000):
        if n < 2 or k < 1:
            raise ParameterError(f"sphere source needs n >= 2 and k >= 1, got n={n}, k={k}")
        if not 0.0 < rho < 1.0 / 3.0:
            raise ParameterError(f"rho must lie in (0, 1/3), got {rho}")
        if balance is not None and not 0.0 < balance < 1.0:
            raise ParameterError(f"balance must lie in (0, 1), got {balance}")
        if retry_budget < 1:
            raise ParameterError("retry budget must be positive")
        self._rho = float(rho)
        self._one_sided = bool(one_sided)
        params = {"n": int(n), "k": int(k), "rho": float(rho), "balance": balance,
                  "one_sided": bool(one_sided), "retry_budget": int(retry_budget),
                  "balance_tolerance": float(balance_tolerance), "pilot_size": int(pilot_size)}
        target, attempts, fraction = self._construct(int(n), int(k), int(seed), balance, int(retry_budget),
                                                     float(balance_tolerance), int(pilot_size))
        super().__init__(target, seed, params)
        self.construction_attempts = attempts
        self.pilot_positive_fraction = fraction
        logger.info("Sphere source n=%d k=%d rho=%.4g: normals accepted after %d attempt(s), positive fraction %.4f",
                    n, k, rho, attempts, fraction)

    def _construct(self, n, k, seed, balance, retry_budget, tolerance, pilot_size):
        for attempt in range(retry_budget):
            rng = make_rng(seed, _CONSTRUCTION_KEY, attempt)
            normals = random_unit_vectors(rng, k, n)
            target = TargetIntersection(tuple(Halfspace(w, 0.0) for w in normals), 1.0)
            pilot = self._keep(target, random_unit_vectors(rng, pilot_size, n))
            if pilot.shape[0] == 0:
                continue
            fraction = float(np.mean(target.evaluate(pilot) == 1))
            if balance is None or abs(fraction - balance) <= tolerance:
                return target, attempt + 1, fraction
        raise GenerationError(
            f"no normals reached positive fraction {balance} +- {tolerance} within {retry_budget} attempts")

    def _keep(self, target: TargetIntersection, X: np.ndarray) -> np.ndarray:
        slacks = X @ target.normals.T
        if self._one_sided:
            worst = slacks.min(axis=1)
            drop = (worst <= 0.0) & (worst > -self._rho)
        else:
            drop = np.any(np.abs(slacks) < self._rho, axis=1)
        return X[~drop]

    def _draw_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        chunks, got = [], 0
        batch = max(64, 2 * m)
        for _ in range(MAX_DRAW_ROUNDS):
            X = self._keep(self._target, random_unit_vectors(rng, batch, self.n))
            chunks.append(X)
            got += X.shape[0]
            if got >= m:
                return np.vstack(chunks)[:m]
            if X.shape[0] < m - got:
                batch = min(MAX_BATCH, 2 * batch)
        raise GenerationError(f"kept {got} of {m} points outside the rho-bands after {MAX_DRAW_ROUNDS} rounds")


def integer_halfspace(weights, threshold: float) -> Halfspace:
    """Halfspace sign(w . x - theta) given integer weights, normalized to a unit normal."""
    w = np.asarray(weights, dtype=float)
    scale = float(np.linalg.norm(w))
    return Halfspace(w / scale, float(threshold) / scale)


class CubeSource(LabeledSource):
    """Uniform points on {-1,+1}^n labeled by low-weight integer halfspaces with half-integer thresholds."""

    kind = "cube"

    def __init__(self, n: int, k: int, weight_bound: int, seed: int):
        if n < 2 or k < 1:
            raise ParameterError(f"cube source needs n >= 2 and k >= 1, got n={n}, k={k}")
        if int(weight_bound) != weight_bound or weight_bound < 1:
            raise ParameterError(f"weight bound must be an integer >= 1, got {weight_bound}")
        W = int(weight_bound)
        rng = make_rng(seed, _CONSTRUCTION_KEY)
        rows, thresholds = [], []
        while len(rows) < k:
            w = rng.integers(-W, W + 1, size=n)
            if not np.any(w):
                continue  # all-zero rows are resampled
            l1 = int(np.abs(w).sum())
            lo = -int(math.ceil(l1 / 2))
            hi = max(lo, int(math.ceil(l1 / 2)) - 1)
            rows.append(w)
            thresholds.append(int(rng.integers(lo, hi + 1)) + 0.5)
        self.integer_weights = np.vstack(rows)
        self.integer_thresholds = np.array(thresholds)
        target = TargetIntersection(
            tuple(integer_halfspace(w, t) for w, t in zip(self.integer_weights, self.integer_thresholds)),
            math.sqrt(n))
        super().__init__(target, seed, {"n": int(n), "k": int(k), "weight_bound": W})

    @property
    def margin_floor(self) -> float:
        """1 / (2 W n), the guaranteed normalized margin."""
        return 1.0 / (2.0 * self._params["weight_bound"] * self._params["n"])

    def _draw_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return (2 * rng.integers(0, 2, size=(m, self.n)) - 1).astype(float)

    def to_record(self) -> Dict:
        record = super().to_record()
        record["integer_weights"] = self.integer_weights.tolist()
        record["integer_thresholds"] = self.integer_thresholds.tolist()
        return record


def _pancake_pilot(seed: int, n: int, pilot_size: int):
    rng = make_rng(seed, _PILOT_KEY)
    signs = np.where(rng.random(pilot_size) < 0.5, 1.0, -1.0)
    z = rng.standard_normal(pilot_size)
    perp = np.sqrt(rng.chisquare(n - 1, pilot_size))
    return signs, z, perp


def _pancake_radius(gap: float, sigma: float, spread: float, pilot) -> float:
    signs, z, perp = pilot
    norms = np.sqrt((signs * gap / 2.0 + sigma * z) ** 2 + (spread * perp) ** 2)
    return float(norms.mean() + 6.0 * norms.std())


def _pancake_band(gap: float, sigma: float, R: float, rho: float) -> float:
    h, band = gap / 2.0, rho * R
    positive = norm.cdf(-h / sigma) - norm.cdf((-band - h) / sigma)
    negative = norm.cdf(h / sigma) - norm.cdf((h - band) / sigma)
    return float(0.5 * (positive + negative))


class PancakeSource(LabeledSource):
    """
    Two thin parallel Gaussian pancakes split by a hidden direction u.

    Components sit at +-gap/2 along u with standard deviation ``sigma`` along u and
    ``spread`` in every orthogonal direction. Labels come from the single halfspace
    u . x > 0 through the midpoint. R is the mean plus six standard deviations of the
    radial distribution; points beyond R are rejected.
    """

    kind = "pancake"

    def __init__(self, n: int, gap: float, sigma: float, seed: int, spread: Optional[float] = None,
                 pilot_size: int = 100000):
        if n < 2:
            raise ParameterError(f"pancake source needs n >= 2, got {n}")
        if not gap > 0 or not sigma > 0:
            raise ParameterError(f"gap and sigma must be positive, got gap={gap}, sigma={sigma}")
        spread = 1.0 / math.sqrt(n) if spread is None else float(spread)
        self._gap, self._sigma, self._spread = float(gap), float(sigma), spread
        self.direction = random_unit_vectors(make_rng(seed, _CONSTRUCTION_KEY), 1, n)[0]
        R = _pancake_radius(self._gap, self._sigma, spread, _pancake_pilot(seed, n, pilot_size))
        target = TargetIntersection((Halfspace(self.direction, 0.0),), R)
        super().__init__(target, seed, {"n": int(n), "gap": self._gap, "sigma": self._sigma,
                                        "spread": spread, "pilot_size": int(pilot_size)})

    def band_mass(self, rho: float) -> float:
        """Closed-form eta(rho, D, f) from the normal CDF (clipping beyond R ignored)."""
        return _pancake_band(self._gap, self._sigma, self.radius, rho)

    def _draw_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        u, R = self.direction, self.radius
        chunks, got = [], 0
        while got < m:
            batch = max(64, m - got + (m - got) // 8)
            signs = np.where(rng.random(batch) < 0.5, 1.0, -1.0)
            along = signs * self._gap / 2.0 + self._sigma * rng.standard_normal(batch)
            g = rng.standard_normal((batch, self.n))
            perp = g - np.outer(g @ u, u)
            X = np.outer(along, u) + self._spread * perp
            X = X[np.einsum('ij,ij->i', X, X) <= R * R]
            chunks.append(X)
            got += X.shape[0]
        return np.vstack(chunks)[:m]


class EmpiricalSource(LabeledSource):
    """Draws with replacement from a fixed labeled multiset, uniform unless weights are given."""

    kind = "empirical"

    def __init__(self, X: np.ndarray, y: np.ndarray, target: TargetIntersection, seed: int,
                 weights: Optional[np.ndarray] = None, counter: Optional[DrawCounter] = None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=int)
        if X.shape[0] == 0 or X.shape[0] != y.shape[0]:
            raise ParameterError("empirical source needs a nonempty sample with one label per point")
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != y.shape or np.any(weights < 0) or not weights.sum() > 0:
                raise ParameterError("weights must be nonnegative, one per point, with a positive sum")
            weights = weights / weights.sum()
        self._X, self._y, self._weights = X, y, weights
        super().__init__(target, seed, {"size": int(X.shape[0]), "weighted": weights is not None}, counter=counter)

    def _indices(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self._weights is None:
            return rng.integers(0, self._X.shape[0], size=m)
        return rng.choice(self._X.shape[0], size=m, p=self._weights)

    def _draw_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return self._X[self._indices(rng, m)]

    def _draw(self, rng: np.random.Generator, m: int) -> Tuple[np.ndarray, np.ndarray]:
        idx = self._indices(rng, m)
        return self._X[idx], self._y[idx]


class FilteredSource(LabeledSource):
    """
    A source conditioned, by rejection, on a predicate of (point, label).

    Accepted surplus from a batch is buffered for the next request, so the output
    is an i.i.d. stream from the conditional distribution.

    Raises
    ------
    StarvationError
        Raised when ``budget`` consecutive base draws are rejected.
    """

    kind = "filtered"

    def __init__(self, base: LabeledSource, accept: Predicate, budget: int = DEFAULT_REJECTION_BUDGET,
                 description: str = "predicate"):
        self._base = base
        self._accept = accept
        self._budget = int(budget)
        self._description = description
        self._buffer_X = np.empty((0, base.n))
        self._buffer_y = np.empty(0, dtype=int)
        self._rate = 0.5
        self.raw_draws = 0
        self.accepted = 0
        self._target = base.target
        self._seed = base.seed
        self._params = {"base": base.kind, "condition": description, "budget": self._budget}
        self._stream_key = base._stream_key
        self._counter = base._counter

    @property
    def base(self) -> LabeledSource:
        return self._base

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.raw_draws if self.raw_draws else float('nan')

    def _draw_points(self, rng, m):
        return self.sample(m)[0]

    def sample(self, m: int) -> Tuple[np.ndarray, np.ndarray]:
        m = int(m)
        if m < 0:
            raise ParameterError(f"sample size must be nonnegative, got {m}")
        X_parts, y_parts = [self._buffer_X], [self._buffer_y]
        got = self._buffer_X.shape[0]
        consecutive = 0
        while got < m:
            batch = int(min(MAX_BATCH, max(64, math.ceil(1.1 * (m - got) / max(self._rate, 1e-4)))))
            X, y = self._base.sample(batch)
            mask = np.asarray(self._accept(X, y), dtype=bool)
            hits = np.flatnonzero(mask)
            self.raw_draws += batch
            self.accepted += hits.size
            self._rate = max(self.accepted / self.raw_draws, 1.0 / self.raw_draws)
            if hits.size:
                consecutive = batch - 1 - int(hits[-1])
                X_parts.append(X[mask])
                y_parts.append(y[mask])
                got += hits.size
            else:
                consecutive += batch
            if consecutive >= self._budget:
                raise StarvationError(
                    f"{consecutive} consecutive rejections while conditioning on {self._description}",
                    rejections=consecutive)
        X_all, y_all = np.vstack(X_parts), np.concatenate(y_parts)
        self._buffer_X, self._buffer_y = X_all[m:], y_all[m:]
        return X_all[:m], y_all[:m]

    def points(self, m: int) -> np.ndarray:
        """Draw m points of the conditional stream."""
        return self.sample(m)[0]

    def spawn(self, key: int) -> "FilteredSource":
        return FilteredSource(self._base.spawn(key), self._accept, self._budget, self._description)

    def to_record(self) -> Dict:
        record = self._base.to_record()
        record["condition"] = self._description
        return record


def make_sphere_margin_source(n: int, k: int, rho: float, seed: int, balance: Optional[float] = 0.5,
                              **kwargs) -> SphereMarginSource:
    """Hard-margin source on the unit sphere (R = 1, theta_i = 0)."""
    return SphereMarginSource(n, k, rho, seed, balance=balance, **kwargs)


def make_cube_source(n: int, k: int, weight_bound: int, seed: int) -> CubeSource:
    """Boolean-cube source labeled by integer-weight halfspaces."""
    return CubeSource(n, k, weight_bound, seed)


def make_pancake_source(n: int, gap: float, sigma: float, seed: int, **kwargs) -> PancakeSource:
    """Soft-margin parallel-pancake mixture."""
    return PancakeSource(n, gap, sigma, seed, **kwargs)


def calibrate_pancake(n: int, eta: float, rho: float, sigma: float, seed: int,
                      spread: Optional[float] = None, pilot_size: int = 100000) -> PancakeSource:
    """
    Pancake source whose closed-form band mass at rho equals eta.

    The gap is found by root bracketing on the band mass, with R recomputed from the
    same pilot draws the source itself uses.
    """
    if not 0.0 < eta < 0.5:
        raise ParameterError(f"target band mass must lie in (0, 1/2), got {eta}")
    spread_value = 1.0 / math.sqrt(n) if spread is None else float(spread)
    pilot = _pancake_pilot(seed, n, pilot_size)

    def excess(gap: float) -> float:
        return _pancake_band(gap, sigma, _pancake_radius(gap, sigma, spread_value, pilot), rho) - eta

    lo, hi = 1e-9, 4.0 * sigma + 1e-3
    if excess(lo) < 0:
        raise ParameterError(f"band mass {eta} is unreachable with sigma={sigma}, rho={rho}")
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise ParameterError(f"could not bracket a gap for band mass {eta}")
    gap = brentq(excess, lo, hi, xtol=1e-12)
    logger.info("Calibrated pancake gap %.6g for eta(%.3g) = %.4g", gap, rho, eta)
    return PancakeSource(n, gap, sigma, seed, spread=spread, pilot_size=pilot_size)


def conditioned_stream(src: LabeledSource, label: int, budget: int = DEFAULT_REJECTION_BUDGET) -> FilteredSource:
    """Stream distributed as src conditioned on f(x) = label."""
    if label not in (-1, 1):
        raise ParameterError(f"label must be -1 or +1, got {label}")
    return FilteredSource(src, lambda X, y: y == label, budget=budget, description=f"label {label:+d}")


def estimate_bias(src: LabeledSource, m: int) -> Tuple[float, float]:
    """Empirical (Pr[f = +1], Pr[f = -1]) over m fresh draws."""
    if m < 1:
        raise ParameterError(f"bias estimate needs m >= 1, got {m}")
    _, y = src.sample(m)
    p_plus = float(np.mean(y == 1))
    return p_plus, 1.0 - p_plus


def make_source(kind: str, seed: int, **params) -> LabeledSource:
    """Build a source from its kind name and parameters."""
    if kind == "sphere":
        return SphereMarginSource(seed=seed, **params)
    if kind == "cube":
        return CubeSource(seed=seed, **params)
    if kind == "pancake":
        eta = params.pop("eta", None)
        if eta is not None:
            rho = params.pop("eta_rho")
            params.pop("gap", None)
            return calibrate_pancake(eta=eta, rho=rho, seed=seed, **params)
        return PancakeSource(seed=seed, **params)
    raise ParameterError(f"unknown source kind '{kind}'")


def export_dataset(src: LabeledSource, m: int, path: str, config: Optional[Dict] = None):
    """Draw m examples and write them as CSV: x0..x{n-1}, then label."""
    X, y = src.sample(m)
    df = points_frame(X, y)
    write_csv(df, path, config=config)
    return df
