# Desc: Utility functions for pyIHS
# Random streams, binomial statistics and artifact writers shared by the modules.
import json
import logging
import math
import os
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import gammaln

from .errors import InputError
from .logger import CustomLogger

logger: logging.Logger = CustomLogger().get_logger()

UNIT_NORM_TOLERANCE = 1e-9
FLOAT_FORMAT = "%.17g"


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by (seed, keys)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 63-bit child seed for the stream (seed, keys)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def random_unit_vectors(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    """Draw m points uniformly from the unit sphere in R^n."""
    g = rng.standard_normal((m, n))
    norms = np.linalg.norm(g, axis=1)
    # zero gaussian vectors occur with probability zero
    norms[norms == 0.0] = 1.0
    return g / norms[:, None]


def as_unit(w: Sequence[float], what: str = "vector") -> np.ndarray:
    """Return w with unit norm, renormalizing with a warning outside the 1e-9 tolerance."""
    w = np.asarray(w, dtype=float)
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        raise InputError(f"{what} has zero norm")
    if abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
        logger.warning("Renormalizing %s with norm %.12g", what, norm)
        return w / norm
    return w


def binomial_stderr(p: float, m: int) -> float:
    """Standard error of an empirical frequency p over m Bernoulli draws."""
    if m <= 0:
        return float('inf')
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / m)


def hoeffding_size(accuracy: float, failure: float) -> int:
    """Draws needed so an empirical frequency is within accuracy w.p. 1 - failure."""
    return int(math.ceil(math.log(2.0 / failure) / (2.0 * accuracy ** 2)))


def ball_volume(dim: int) -> float:
    """Lebesgue volume of the unit ball in R^dim."""
    return float(np.exp((dim / 2.0) * np.log(np.pi) - gammaln(dim / 2.0 + 1.0)))


def to_jsonable(obj: Any) -> Any:
    """Convert numpy containers and scalars into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def dump_json(record: Dict, path: str) -> None:
    """Write a JSON record with sorted keys, creating parent directories."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w') as f:
        json.dump(to_jsonable(record), f, sort_keys=True, indent=2)
        f.write("\n")
    logger.info("Wrote %s", path)


def dump_jsonl(records: Sequence[Dict], path: str) -> None:
    """Write one JSON object per line."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w') as f:
        for record in records:
            f.write(json.dumps(to_jsonable(record), sort_keys=True))
            f.write("\n")
    logger.info("Wrote %d records to %s", len(records), path)


def write_csv(df: pd.DataFrame, path: str, config: Optional[Dict] = None) -> None:
    """
    Write a dataframe as CSV with floats at 17 significant digits.

    Parameters
    ----------
    df : pd.DataFrame
        Table to write.
    path : str
        Destination file; parent directories are created.
    config : dict, optional
        Resolved run configuration, embedded as a leading ``# config:`` comment line.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as f:
        if config is not None:
            f.write("# config: " + json.dumps(to_jsonable(config), sort_keys=True) + "\n")
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %d rows to %s", len(df), path)


def read_csv(path: str) -> pd.DataFrame:
    """Read a CSV written by write_csv, skipping the config comment."""
    return pd.read_csv(path, comment='#')


def points_frame(X: np.ndarray, y: Optional[np.ndarray] = None, **extra: np.ndarray) -> pd.DataFrame:
    """Tidy frame with columns x0..x{n-1}, then label, then any extra columns."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    df = pd.DataFrame(X, columns=[f"x{i}" for i in range(X.shape[1])])
    if y is not None:
        df["label"] = np.asarray(y, dtype=int)
    for name, values in extra.items():
        df[name] = values
    return df


def frame_points(df: pd.DataFrame):
    """Split a tidy frame back into (X, labels)."""
    columns = [c for c in df.columns if c.startswith("x") and c[1:].isdigit()]
    columns.sort(key=lambda c: int(c[1:]))
    X = df[columns].to_numpy(dtype=float)
    y = df["label"].to_numpy(dtype=int) if "label" in df.columns else None
    return X, y
