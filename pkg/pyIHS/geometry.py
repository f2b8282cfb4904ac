"""Halfspaces, intersections of halfspaces, the sphere lifting and margins.

Label conventions are fixed here for the whole package: a target evaluates
sign(0) = -1 (strict inequality for the positive region), a learned lifted
hypothesis evaluates sign(0) = +1.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import InputError, ParameterError
from .logger import CustomLogger
from .utils import UNIT_NORM_TOLERANCE, as_unit

logger: logging.Logger = CustomLogger().get_logger()

SQRT2 = math.sqrt(2.0)
LIFT_LAST = 1.0 / SQRT2
RADIUS_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Halfspace:
    """Classifier sign(w . x - theta) with unit normal w."""

    w: np.ndarray
    theta: float

    def __post_init__(self):
        object.__setattr__(self, 'w', as_unit(self.w, "halfspace normal"))
        object.__setattr__(self, 'theta', float(self.theta))

    @property
    def dim(self) -> int:
        return int(self.w.shape[0])


@dataclass(frozen=True, eq=False)
class TargetIntersection:
    """
    Intersection of k halfspaces, f(x) = +1 iff w_i . x - theta_i > 0 for every i.

    Parameters
    ----------
    halfspaces : tuple of Halfspace
        The k defining halfspaces, all of the same dimension.
    ambient_radius : float
        R, the radius bounding the support of the distribution.
    """

    halfspaces: Tuple[Halfspace, ...]
    ambient_radius: float
    normals: np.ndarray = field(init=False, repr=False, compare=False)
    thresholds: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        halfspaces = tuple(self.halfspaces)
        if len(halfspaces) < 1:
            raise InputError("a target needs at least one halfspace")
        dims = {h.dim for h in halfspaces}
        if len(dims) != 1:
            raise InputError(f"halfspaces of mixed dimension {sorted(dims)}")
        R = float(self.ambient_radius)
        if not R > 0:
            raise InputError(f"ambient radius must be positive, got {R}")
        for i, h in enumerate(halfspaces):
            if abs(h.theta) > R * (1 + RADIUS_SLACK):
                raise InputError(f"|theta_{i}| = {abs(h.theta)} exceeds the ambient radius {R}")
        object.__setattr__(self, 'halfspaces', halfspaces)
        object.__setattr__(self, 'ambient_radius', R)
        object.__setattr__(self, 'normals', np.vstack([h.w for h in halfspaces]))
        object.__setattr__(self, 'thresholds', np.array([h.theta for h in halfspaces]))

    @property
    def n(self) -> int:
        return int(self.normals.shape[1])

    @property
    def k(self) -> int:
        return int(self.normals.shape[0])

    def check_points(self, X) -> np.ndarray:
        """Return X as a 2-d float array, raising on a dimension mismatch."""
        X = np.asarray(X, dtype=float)
        X2 = np.atleast_2d(X)
        if X2.ndim != 2 or X2.shape[1] != self.n:
            raise InputError(f"expected points of dimension {self.n}, got shape {X.shape}")
        return X2

    def slacks(self, X) -> np.ndarray:
        """Matrix of w_i . x - theta_i, one row per point."""
        X = self.check_points(X)
        return X @ self.normals.T - self.thresholds

    def min_slack(self, X) -> np.ndarray:
        """min_i (w_i . x - theta_i) / R per point."""
        return self.slacks(X).min(axis=1) / self.ambient_radius

    def evaluate(self, X) -> np.ndarray:
        """Vectorised target labels in {-1, +1}; ties go to -1."""
        return np.where(self.slacks(X).min(axis=1) > 0.0, 1, -1)

    def to_record(self) -> Dict:
        """Structured record {n, k, R, rows of (w, theta)}; floats round-trip exactly."""
        return {
            "n": self.n,
            "k": self.k,
            "R": self.ambient_radius,
            "rows": [{"w": [float(v) for v in h.w], "theta": h.theta} for h in self.halfspaces],
        }

    @classmethod
    def from_record(cls, record: Dict) -> "TargetIntersection":
        try:
            rows = record["rows"]
            target = cls(tuple(Halfspace(np.array(r["w"], dtype=float), float(r["theta"])) for r in rows),
                         float(record["R"]))
        except KeyError as e:
            raise InputError(f"target record is missing field {e}") from e
        if target.n != int(record.get("n", target.n)) or target.k != int(record.get("k", target.k)):
            raise InputError("target record header disagrees with its rows")
        return target


@dataclass(frozen=True, eq=False)
class LiftedPoint:
    """A point mapped onto the unit sphere of R^(n+2)."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if abs(float(np.linalg.norm(coords)) - 1.0) > UNIT_NORM_TOLERANCE:
            raise InputError("lifted point is not unit norm")
        if coords[-1] != LIFT_LAST:
            raise InputError("lifted point must end with 1/sqrt(2)")
        object.__setattr__(self, 'coords', coords)


@dataclass(frozen=True, eq=False)
class LiftedHalfspace:
    """Origin-centred halfspace in the lifted space; the sqrt-slot coordinate is zero."""

    w_prime: np.ndarray

    def __post_init__(self):
        w_prime = as_unit(self.w_prime, "lifted normal")
        if w_prime[-2] != 0.0:
            raise InputError("lifted normal must vanish on the radial coordinate")
        object.__setattr__(self, 'w_prime', w_prime)


def target_to_record(f: TargetIntersection) -> Dict:
    """Structured record of a target; see TargetIntersection.to_record."""
    return f.to_record()


def target_from_record(record: Dict) -> TargetIntersection:
    return TargetIntersection.from_record(record)


def evaluate_target(f: TargetIntersection, x: Sequence[float]) -> int:
    """+1 iff every w_i . x - theta_i > 0, else -1."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("evaluate_target takes a single point")
    return int(f.evaluate(x)[0])


def lift_points(X, R: float) -> np.ndarray:
    """
    Lift a batch of points onto the unit sphere of R^(n+2).

    Each x becomes (x / (sqrt2 R), sqrt(R^2 - |x|^2) / (sqrt2 R), 1/sqrt2).

    Parameters
    ----------
    X : array-like, shape (m, n)
        Points with norm at most R.
    R : float
        Ambient radius.

    Returns
    -------
    np.ndarray, shape (m, n + 2)

    Raises
    ------
    InputError
        Raised if a point lies outside the ball of radius R(1 + 1e-9).
    """
    R = float(R)
    if not R > 0:
        raise InputError(f"radius must be positive, got {R}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sq = np.einsum('ij,ij->i', X, X)
    if np.any(sq > (R * (1 + RADIUS_SLACK)) ** 2):
        worst = float(np.sqrt(sq.max()))
        raise InputError(f"point of norm {worst} lies outside radius {R}")
    # within the slack the radicand may be slightly negative
    radial = np.sqrt(np.maximum(R * R - sq, 0.0))
    scale = SQRT2 * R
    out = np.empty((X.shape[0], X.shape[1] + 2))
    out[:, :-2] = X / scale
    out[:, -2] = radial / scale
    out[:, -1] = LIFT_LAST
    return out


def lift_point(x: Sequence[float], R: float) -> LiftedPoint:
    """Lift a single point; see lift_points."""
    return LiftedPoint(lift_points(np.asarray(x, dtype=float)[None, :], R)[0])


def lift_halfspace(h: Halfspace, R: float) -> LiftedHalfspace:
    """Origin-centred lifted normal w' = (w, 0, -theta/R) / sqrt(1 + theta^2/R^2)."""
    R = float(R)
    if abs(h.theta) > R * (1 + RADIUS_SLACK):
        raise InputError(f"|theta| = {abs(h.theta)} exceeds radius {R}")
    t = h.theta / R
    w_prime = np.concatenate([h.w, [0.0, -t]]) / math.sqrt(1.0 + t * t)
    return LiftedHalfspace(w_prime)


def point_margin(f: TargetIntersection, x: Sequence[float]) -> float:
    """-min_i (w_i . x - theta_i) / R; a negative point has margin rho iff this is >= rho."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("point_margin takes a single point")
    return float(-f.min_slack(x)[0])


def sample_margin(f: TargetIntersection, X) -> float:
    """Smallest |min_i (w_i . x - theta_i)| / R over a sample: its empirical hard margin."""
    X = f.check_points(X)
    if X.shape[0] == 0:
        raise InputError("sample is empty")
    return float(np.abs(f.min_slack(X)).min())


def soft_margin_estimate(f: TargetIntersection, sample, rho: float) -> float:
    """
    Empirical rho-soft margin: fraction of points whose worst slack lies in [-rho, 0].

    Parameters
    ----------
    f : TargetIntersection
        Target whose band is measured.
    sample : array-like, shape (m, n)
        Points drawn from the distribution.
    rho : float
        Band half-width relative to R.

    Returns
    -------
    float
        Unbiased estimate of eta(rho, D, f).

    Raises
    ------
    ParameterError
        Raised unless 0 <= rho < 1.
    """
    if not 0.0 <= rho < 1.0:
        raise ParameterError(f"rho must lie in [0, 1), got {rho}")
    X = f.check_points(sample)
    if X.shape[0] == 0:
        raise InputError("soft margin estimate needs a nonempty sample")
    s = f.min_slack(X)
    return float(np.mean((s >= -rho) & (s <= 0.0)))


@dataclass
class MarginWitness:
    """Outcome of checking the half-rho-squared margin on a support set."""

    rho: float
    bound: float
    holds: bool
    violators: List[int]
    min_negative_margin: float
    n_negative: int

    def to_record(self) -> Dict:
        return {
            "rho": self.rho,
            "bound": self.bound,
            "holds": self.holds,
            "violators": self.violators,
            "min_negative_margin": self.min_negative_margin,
            "n_negative": self.n_negative,
        }


def robust_margin_witness(f: TargetIntersection, support, rho: float) -> MarginWitness:
    """
    Check that every negative support point has point_margin >= rho^2 / 2.

    A rho-robust support with at least one positive point must pass; the
    negative points failing the bound are listed by index.

    Raises
    ------
    InputError
        Raised if the support has no positive point.
    """
    X = f.check_points(support)
    labels = f.evaluate(X)
    if not np.any(labels == 1):
        raise InputError("robust margin witness needs at least one positive support point")
    bound = 0.5 * rho * rho
    neg = np.flatnonzero(labels == -1)
    margins = -f.min_slack(X[neg]) if neg.size else np.empty(0)
    violators = [int(i) for i in neg[margins < bound]]
    witness = MarginWitness(
        rho=float(rho),
        bound=bound,
        holds=not violators,
        violators=violators,
        min_negative_margin=float(margins.min()) if margins.size else float('inf'),
        n_negative=int(neg.size),
    )
    if violators:
        logger.debug("Margin witness: %d of %d negatives below %.6g", len(violators), neg.size, bound)
    return witness
