"""Hit-and-run sampling from consistency polytopes.

A consistency polytope is the unit ball cut by homogeneous constraints
w . x >= 0 (positives) and w . x <= 0 (negatives). Chords through the ball
and the constraint hyperplanes have closed forms, so the walk never rejects.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import nnls

from .errors import ConfigError, DegenerateChordError, InfeasibleError, InputError, ThinBodyError
from .logger import CustomLogger
from .utils import binomial_stderr, make_rng, random_unit_vectors

logger: logging.Logger = CustomLogger().get_logger()

MIN_CHORD = 1e-12
MAX_DEGENERATE = 100
MAX_REDRAWS = 8


@dataclass(frozen=True, eq=False)
class ConsistencyPolytope:
    """
    Body {|w| <= 1, w . x >= 0 for x in pos, w . x <= 0 for x in neg}.

    Parameters
    ----------
    dim : int
        Ambient dimension (n + 2 after lifting).
    pos_constraints : np.ndarray, shape (p, dim)
        Points that must score nonnegative.
    neg_constraints : np.ndarray, shape (q, dim)
        Points that must score nonpositive.
    """

    dim: int
    pos_constraints: np.ndarray
    neg_constraints: np.ndarray
    radius_bound: float = 1.0
    rows: np.ndarray = field(init=False, repr=False)
    row_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dim = int(self.dim)
        if dim < 1:
            raise InputError(f"polytope dimension must be positive, got {dim}")
        pos = np.asarray(self.pos_constraints, dtype=float).reshape(-1, dim) if np.size(self.pos_constraints) \
            else np.empty((0, dim))
        neg = np.asarray(self.neg_constraints, dtype=float).reshape(-1, dim) if np.size(self.neg_constraints) \
            else np.empty((0, dim))
        rows = np.vstack([pos, -neg])
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms == 0.0):
            raise InputError("constraint points must be nonzero")
        object.__setattr__(self, 'dim', dim)
        object.__setattr__(self, 'pos_constraints', pos)
        object.__setattr__(self, 'neg_constraints', neg)
        object.__setattr__(self, 'rows', rows)
        object.__setattr__(self, 'row_norms', norms)

    @classmethod
    def unit_ball(cls, dim: int) -> "ConsistencyPolytope":
        return cls(dim, np.empty((0, dim)), np.empty((0, dim)))

    @property
    def n_constraints(self) -> int:
        return int(self.rows.shape[0])

    def check_vectors(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.dim or w.ndim > 2:
            raise InputError(f"expected vectors of dimension {self.dim}, got shape {w.shape}")
        return w


def membership(H: ConsistencyPolytope, w) -> bool:
    """Exact membership: |w|^2 <= 1 and every constraint holds with zero tolerance."""
    w = H.check_vectors(w)
    if w.ndim != 1:
        raise InputError("membership takes a single vector")
    return bool(_members(H, w[None, :])[0])


def _members(H: ConsistencyPolytope, W: np.ndarray) -> np.ndarray:
    inside = np.einsum('ij,ij->i', W, W) <= 1.0
    if H.n_constraints:
        inside &= np.all(W @ H.rows.T >= 0.0, axis=1)
    return inside


def min_slack(H: ConsistencyPolytope, w) -> np.ndarray:
    """Euclidean distance to the nearest face: min(1 - |w|, min_i a_i . w / |a_i|)."""
    w = H.check_vectors(w)
    W = np.atleast_2d(w)
    slack = 1.0 - np.linalg.norm(W, axis=1)
    if H.n_constraints:
        slack = np.minimum(slack, ((W @ H.rows.T) / H.row_norms).min(axis=1))
    return slack if w.ndim == 2 else slack[0]


def _chords(H: ConsistencyPolytope, P: np.ndarray, D: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pd = np.einsum('ij,ij->i', P, D)
    pp = np.einsum('ij,ij->i', P, P)
    root = np.sqrt(np.maximum(pd * pd - pp + 1.0, 0.0))
    lo, hi = -pd - root, -pd + root
    if H.n_constraints:
        AP = P @ H.rows.T
        AD = D @ H.rows.T
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = -AP / AD
        lo = np.maximum(lo, np.where(AD > 0.0, ratio, -np.inf).max(axis=1))
        hi = np.minimum(hi, np.where(AD < 0.0, ratio, np.inf).min(axis=1))
    return np.minimum(lo, 0.0), np.maximum(hi, 0.0)


def chord(H: ConsistencyPolytope, p, d) -> Tuple[float, float]:
    """
    Maximal interval [t_lo, t_hi] with p + t d inside H.

    Raises
    ------
    DegenerateChordError
        Raised when the chord is shorter than 1e-12, so p is not interior.
    """
    p = H.check_vectors(p)
    d = H.check_vectors(d)
    if p.ndim != 1 or d.ndim != 1:
        raise InputError("chord takes a single point and direction")
    lo, hi = _chords(H, p[None, :], d[None, :])
    t_lo, t_hi = float(lo[0]), float(hi[0])
    if t_hi - t_lo < MIN_CHORD:
        raise DegenerateChordError(f"chord of length {t_hi - t_lo:.3g} through a boundary point")
    return t_lo, t_hi


def find_interior(H: ConsistencyPolytope, slack_target: float = 0.0) -> np.ndarray:
    """
    Point of H maximizing the distance to its faces.

    The homogeneous constraints form a cone, so the deepest point is u / (1 + s)
    where u is the unit direction maximizing s = min_i a_i . u / |a_i|. That
    direction solves min |v| s.t. A v >= 1, computed exactly as a least-distance
    program through nonnegative least squares.

    Parameters
    ----------
    H : ConsistencyPolytope
        Body to search.
    slack_target : float
        Required Euclidean distance from every face.

    Returns
    -------
    np.ndarray
        Interior point with min_slack >= slack_target.

    Raises
    ------
    InfeasibleError
        Raised when no point of H has positive slack at least slack_target.
    """
    if H.n_constraints == 0:
        return np.zeros(H.dim)
    A = H.rows / H.row_norms[:, None]
    E = np.vstack([A.T, np.ones((1, A.shape[0]))])
    f = np.zeros(H.dim + 1)
    f[-1] = 1.0
    try:
        u, _ = nnls(E, f, maxiter=50 * E.shape[1])
    except RuntimeError as e:
        raise InfeasibleError(f"least-distance solve did not converge: {e}") from e
    r = E @ u - f
    if abs(r[-1]) < 1e-14 or not np.any(r[:-1]):
        raise InfeasibleError("constraints admit no interior point", best_slack=0.0)
    direction = -r[:-1] / r[-1]
    direction /= np.linalg.norm(direction)
    depth = float((A @ direction).min())
    best = depth / (1.0 + depth) if depth > 0 else depth
    if not best > 0 or best < slack_target:
        raise InfeasibleError(f"best slack {best:.6g} is below the target {slack_target:.6g}", best_slack=best)
    w = direction / (1.0 + depth)
    logger.debug("Interior point with slack %.6g among %d constraints", best, H.n_constraints)
    return w


@dataclass
class WalkConfig:
    """Step budget and seeding of the hit-and-run walk."""

    steps_per_sample: int
    warm_start: Optional[np.ndarray] = None
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.steps_per_sample) != self.steps_per_sample or self.steps_per_sample < 1:
            raise ConfigError(f"steps_per_sample must be a positive integer, got {self.steps_per_sample}")
        self.steps_per_sample = int(self.steps_per_sample)

    @staticmethod
    def default_steps(dim: int, rho: float) -> int:
        """50 dim log(1 / (0.01 rho)) steps."""
        return int(math.ceil(50 * dim * math.log(1.0 / (0.01 * rho))))

    @classmethod
    def for_margin(cls, dim: int, rho: float, rng_seed: int = 0, warm_start=None) -> "WalkConfig":
        return cls(cls.default_steps(dim, rho), warm_start=warm_start, rng_seed=rng_seed)


def sample_uniform(H: ConsistencyPolytope, cfg: WalkConfig, size: Optional[int] = None) -> np.ndarray:
    """
    Hit-and-run iterates after cfg.steps_per_sample steps.

    With ``size`` the walk runs that many independent chains from the warm start
    and returns one point per chain; otherwise a single vector is returned.
    Every returned point satisfies membership exactly.

    Raises
    ------
    ThinBodyError
        Raised when a chain meets more than 100 consecutive degenerate chords.
    """
    rng = make_rng(cfg.rng_seed)
    start = find_interior(H) if cfg.warm_start is None else H.check_vectors(cfg.warm_start)
    if not membership(H, start):
        raise InputError("warm start lies outside the body")
    chains = 1 if size is None else int(size)
    if chains < 1:
        raise InputError(f"size must be positive, got {chains}")
    P = np.tile(start, (chains, 1))
    degenerate = np.zeros(chains, dtype=int)
    for _ in range(cfg.steps_per_sample):
        D = random_unit_vectors(rng, chains, H.dim)
        lo, hi = _chords(H, P, D)
        thin = hi - lo < MIN_CHORD
        degenerate = np.where(thin, degenerate + 1, 0)
        if np.any(degenerate > MAX_DEGENERATE):
            raise ThinBodyError(f"more than {MAX_DEGENERATE} consecutive degenerate chords")
        if np.any(thin):
            logger.debug("Retrying %d degenerate chord(s)", int(thin.sum()))
        moving = ~thin
        pending = moving.copy()
        nxt = P.copy()
        # rounding at a chord end can leave the body; redraw on the same chord
        for _ in range(MAX_REDRAWS):
            idx = np.flatnonzero(pending)
            if idx.size == 0:
                break
            t = lo[idx] + (hi[idx] - lo[idx]) * rng.random(idx.size)
            candidate = P[idx] + t[:, None] * D[idx]
            ok = _members(H, candidate)
            nxt[idx[ok]] = candidate[ok]
            pending[idx[ok]] = False
        P = nxt
    return P[0] if size is None else P


def estimate_volume_fraction(H_outer: ConsistencyPolytope, predicate: Callable[[np.ndarray], np.ndarray],
                             m: int, cfg: WalkConfig) -> Tuple[float, float]:
    """
    Fraction of m uniform samples of H_outer satisfying a vectorised predicate.

    Returns
    -------
    (fraction, stderr)
    """
    if m < 1:
        raise InputError(f"m must be positive, got {m}")
    W = sample_uniform(H_outer, cfg, size=m)
    hits = np.asarray(predicate(W), dtype=bool)
    fraction = float(hits.mean())
    return fraction, binomial_stderr(fraction, m)


def sample_ball(dim: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Exact uniform draws from the unit ball in R^dim."""
    directions = random_unit_vectors(rng, m, dim)
    return directions * rng.random(m)[:, None] ** (1.0 / dim)
