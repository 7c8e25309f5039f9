"""
Topological similarity, convergence time and correlation statistics.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy.spatial.distance import pdist
from scipy.special import betainc
from scipy.stats import rankdata

from .common.errors import DegenerateInput, EmptyCurve, LengthMismatch
from .mapping_core import AttributeSpace, Mapping

DEFAULT_SHUFFLES = 10_000


class PairDistanceVector(BaseModel):
    values: Tuple[int, ...] = Field(..., description="distances over pairs i<j in lexicographic order")


class LearningCurve(BaseModel):
    losses: List[float]

    @field_validator("losses")
    @classmethod
    def _finite(cls, losses):
        if not all(math.isfinite(x) for x in losses):
            raise ValueError("learning curve entries must be finite")
        return losses

    @property
    def epochs(self) -> int:
        return len(self.losses)


def _hamming_pairs(rows: np.ndarray) -> PairDistanceVector:
    # pdist's hamming is the mismatch fraction; scale back to counts
    width = rows.shape[1]
    distances = np.rint(pdist(rows, metric="hamming") * width).astype(int)
    return PairDistanceVector(values=tuple(int(d) for d in distances))


def hamming_pairs_g(space: AttributeSpace) -> PairDistanceVector:
    rows = np.array([space.attributes_of(i) for i in range(space.num_objects)])
    return _hamming_pairs(rows)


def hamming_pairs_z(mapping: Mapping) -> PairDistanceVector:
    rows = np.array([mapping.code_digits(i) for i in range(mapping.space.num_objects)])
    return _hamming_pairs(rows)


def _as_pair(xs: Sequence[float], ys: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"cannot correlate vectors of length {x.size} and {y.size}")
    return x, y


def _rho(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("correlation is undefined for a constant vector")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """
    Sample Pearson rho and its two-sided p-value.
    p comes from t = rho*sqrt((n-2)/(1-rho^2)) through the regularized incomplete beta function.
    """
    x, y = _as_pair(xs, ys)
    n = x.size
    if n < 3:
        raise DegenerateInput(f"need at least 3 observations, got {n}")
    r = _rho(x, y)
    if abs(r) == 1.0:
        return r, 0.0
    df = n - 2
    t_squared = r * r * df / (1.0 - r * r)
    p = float(betainc(0.5 * df, 0.5, df / (df + t_squared)))
    return r, p


def permutation_p_value(xs: Sequence[float], ys: Sequence[float],
                        shuffles: int = DEFAULT_SHUFFLES, seed: int = 0) -> float:
    """Two-sided permutation p for Pearson rho; cannot resolve below 1/(shuffles+1)."""
    x, y = _as_pair(xs, ys)
    observed = abs(_rho(x, y))
    rng = np.random.default_rng(seed)
    dx = x - x.mean()
    dy = y - y.mean()
    norm = math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy)))

    hits = 0
    # chunks keep the permutation matrix small for long vectors
    chunk = 1000
    done = 0
    while done < shuffles:
        size = min(chunk, shuffles - done)
        perms = np.argsort(rng.random((size, x.size)), axis=1)
        shuffled = np.abs(dy[perms] @ dx) / norm
        hits += int(np.count_nonzero(shuffled >= observed - 1e-12))
        done += size
    return (hits + 1) / (shuffles + 1)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """
    Pearson of tie-averaged ranks. Returns None (not defined) when either
    rank vector is constant; callers decide what that means.
    """
    x, y = _as_pair(xs, ys)
    if x.size < 2:
        raise LengthMismatch("spearman needs at least 2 observations")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        return None
    return _rho(rx, ry)


def topsim(mapping: Mapping) -> float:
    d_g = hamming_pairs_g(mapping.space).values
    d_z = hamming_pairs_z(mapping).values
    # constant code-side distances (fully degenerate): scored as one by convention
    if len(set(d_z)) == 1:
        return 1.0
    rho = spearman(d_g, d_z)
    # constant object-side distances (L = 1) carry no ranking to agree with
    return 0.0 if rho is None else rho


def convergence_time(curve: LearningCurve) -> float:
    """Area under the per-epoch loss curve, left Riemann sum with unit epochs."""
    if not curve.losses:
        raise EmptyCurve("learning curve has no epochs")
    return float(np.sum(np.asarray(curve.losses, dtype=np.float64)))
