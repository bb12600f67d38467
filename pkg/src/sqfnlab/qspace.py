"""Finite quasi-metric spaces: measured constants and the chain-regularized distance.

A quasi-distance here is any nonnegative function on pairs that vanishes
exactly on the diagonal; its symmetry defect and quasi-triangle constant are
*measured*, not assumed. The regularization replaces the quasi-distance by
the cheapest chain between two points in snowflaked weights, which on a
finite cloud is an exact all-pairs shortest-path problem.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import _scan

__all__ = [
    "QuasiMetricSpace",
    "QuasiMetricConstants",
    "RegularizedMetric",
    "measure_constants",
    "regularize",
    "dist_to_set",
    "holder_defect",
    "symmetrize",
    "load_space",
]

# Relative tolerance used wherever exact equality is mathematically expected
# but floating-point chains intervene.
REL_TOL = 1e-9

# Ratio witnesses closer to 2 than this certify that the quasi-triangle
# constant of a Euclidean sample cloud equals 2 exactly (it can never exceed
# 2 for a genuine metric).
_EUCLID_WITNESS_TOL = 1e-12


class QuasiMetricError(ValueError):
    """Raised for inadmissible distance data."""


@dataclass(frozen=True)
class QuasiMetricSpace:
    """A finite point cloud with an explicit quasi-distance matrix.

    ``coords`` is set when the points live in an ambient vector space;
    ``euclidean`` marks the case where ``dist`` is exactly the Euclidean
    metric on ``coords`` (which unlocks exactness shortcuts downstream).
    """

    dist: np.ndarray
    coords: Optional[np.ndarray] = None
    euclidean: bool = False

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise QuasiMetricError("distance matrix must be square")
        if d.shape[0] < 1:
            raise QuasiMetricError("need at least one point")
        if not np.all(np.isfinite(d)):
            raise QuasiMetricError("non-finite distance entries")
        if np.any(d < 0):
            raise QuasiMetricError("negative distance entries")
        if np.any(np.diag(d) != 0):
            raise QuasiMetricError("nonzero diagonal")
        off = d + np.eye(d.shape[0])
        if np.any(off <= 0):
            raise QuasiMetricError("zero distance between distinct points")
        object.__setattr__(self, "dist", d)
        if self.coords is not None:
            c = np.atleast_2d(np.asarray(self.coords, dtype=np.float64))
            if c.shape[0] != d.shape[0]:
                raise QuasiMetricError("coords/matrix size mismatch")
            object.__setattr__(self, "coords", c)

    @property
    def n_points(self) -> int:
        return self.dist.shape[0]

    @classmethod
    def from_matrix(cls, matrix) -> "QuasiMetricSpace":
        return cls(dist=np.asarray(matrix, dtype=np.float64))

    @classmethod
    def from_points(cls, points) -> "QuasiMetricSpace":
        """Euclidean metric space on an explicit list of ambient vectors."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d = cdist(pts, pts)
        np.fill_diagonal(d, 0.0)
        return cls(dist=d, coords=pts, euclidean=True)

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray, np.ndarray], float],
                      points) -> "QuasiMetricSpace":
        """Closed-form quasi-distance evaluated over all coordinate pairs."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = pts.shape[0]
        d = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    d[i, j] = fn(pts[i], pts[j])
        return cls(dist=d, coords=pts)


@dataclass(frozen=True)
class QuasiMetricConstants:
    c_rho: float          # best quasi-triangle constant
    c_rho_tilde: float    # best symmetry constant
    alpha: float          # 1/log2(c_rho); inf when c_rho == 1

    @property
    def alpha_is_finite(self) -> bool:
        return math.isfinite(self.alpha)


def symmetrize(dist: np.ndarray) -> np.ndarray:
    """Pointwise max of the distance and its transpose (idempotent)."""
    return np.maximum(dist, dist.T)


def _euclidean_witness(space: QuasiMetricSpace) -> bool:
    """True when some sample triple attains the metric-extremal ratio 2.

    On a Euclidean cloud the quasi-triangle constant never exceeds 2, so one
    midpoint-exact triple pins it at 2 without the cubic scan. Consecutive
    triples catch the equispaced-collinear runs of the built-in generators.
    """
    if not space.euclidean or space.n_points < 3:
        return False
    d = space.dist
    n = space.n_points
    idx = np.arange(n - 2)
    num = d[idx, idx + 2]
    den = np.maximum(d[idx, idx + 1], d[idx + 1, idx + 2])
    return bool(np.any(num >= (2.0 - _EUCLID_WITNESS_TOL) * den))


def measure_constants(space: QuasiMetricSpace) -> QuasiMetricConstants:
    """Exact scan for the symmetry and quasi-triangle constants.

    The quasi-triangle constant is the max over unequal triples of
    rho(x,y)/max(rho(x,z), rho(z,y)); computed through one dense
    (min,max)-product, an O(n^3) exact reduction.
    """
    if space.n_points < 2:
        raise QuasiMetricError("need at least two points")
    d = space.dist
    mask = ~np.eye(space.n_points, dtype=bool)
    c_tilde = float(np.max(d.T[mask] / d[mask]))
    if _euclidean_witness(space):
        c_rho = 2.0
    else:
        m = _scan.minimax_product(d)
        c_rho = float(np.max(d[mask] / m[mask]))
        if space.euclidean:
            c_rho = min(c_rho, 2.0)
    c_rho = max(c_rho, 1.0)
    alpha = math.inf if c_rho <= 1.0 + _EUCLID_WITNESS_TOL else 1.0 / math.log2(c_rho)
    return QuasiMetricConstants(c_rho=c_rho, c_rho_tilde=c_tilde, alpha=alpha)


@dataclass(frozen=True)
class RegularizedMetric:
    """The chain-regularized quasi-distance of a finite cloud.

    ``rho_sharp`` is symmetric with zero diagonal; its ``alpha``-th power is
    the cost of the cheapest chain between the endpoints in symmetrized
    snowflaked weights (bottleneck cost when ``alpha`` is infinite). When
    ``exact_euclidean`` is set the matrix is shared with the base space
    (chains cannot improve a metric at snowflake exponent 1).
    """

    base: QuasiMetricSpace
    constants: QuasiMetricConstants
    rho_sharp: np.ndarray
    exact_euclidean: bool = False

    @property
    def alpha(self) -> float:
        return self.constants.alpha

    @property
    def n_points(self) -> int:
        return self.base.n_points

    def diam(self) -> float:
        return float(self.rho_sharp.max())

    def row(self, i: int) -> np.ndarray:
        return self.rho_sharp[i]

    def rows(self, idx) -> np.ndarray:
        return self.rho_sharp[np.asarray(idx, dtype=np.intp)]


def regularize(space: QuasiMetricSpace,
               constants: Optional[QuasiMetricConstants] = None) -> RegularizedMetric:
    """Compute rho_# exactly via all-pairs shortest paths in snowflaked weights.

    On a finite set the chain infimum is attained by a simple path (repeated
    points never shorten a positive-weight chain), so a dense path sweep is
    exact. The bottleneck variant realizes the alpha = infinity case.
    """
    if constants is None:
        constants = measure_constants(space)
    sym = symmetrize(space.dist)
    if space.euclidean and constants.c_rho == 2.0:
        # alpha == 1 and the triangle inequality holds, so no chain can beat
        # the direct edge: rho_# is the metric itself, exactly.
        return RegularizedMetric(base=space, constants=constants,
                                 rho_sharp=space.dist, exact_euclidean=True)
    if not constants.alpha_is_finite:
        sharp = _scan.bottleneck_paths(sym)
    else:
        a = constants.alpha
        costs = _scan.shortest_paths(sym ** a)
        sharp = costs ** (1.0 / a)
    np.fill_diagonal(sharp, 0.0)
    return RegularizedMetric(base=space, constants=constants, rho_sharp=sharp)


def dist_to_set(reg: RegularizedMetric, index: int, subset) -> float:
    """delta_E at a cloud index: min regularized distance into the subset."""
    subset = np.asarray(subset, dtype=np.intp)
    if subset.size == 0:
        raise QuasiMetricError("empty target set")
    return float(reg.rho_sharp[index, subset].min())


def holder_defect(reg: RegularizedMetric, beta: float, *,
                  max_points: int = 60, n_samples: int = 200_000,
                  rng_seed: int = 0) -> float:
    """Worst quadruple ratio against the Holder-type bound at order beta.

    Returns the max over quadruples (x, y, z, w) of
    |rho_#(x,y) - rho_#(z,w)| divided by
    (1/beta) * max(rho_#(x,y), rho_#(z,w))^(1-beta)
             * (rho_#(x,z)^beta + rho_#(y,w)^beta).
    A value <= 1 (plus tolerance) certifies the bound. The quadruple set is
    subsampled with a fixed seed above ``max_points`` points.
    """
    if not (0.0 < beta):
        raise QuasiMetricError("beta must be positive")
    if math.isfinite(reg.alpha) and beta > reg.alpha * (1 + REL_TOL):
        raise QuasiMetricError("beta exceeds the metrization exponent")
    if not math.isfinite(beta):
        raise QuasiMetricError("beta must be finite")
    r = reg.rho_sharp
    n = reg.n_points
    if n <= max_points:
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        pairs = np.column_stack([ii.ravel(), jj.ravel()])
        x = np.repeat(pairs[:, 0], len(pairs))
        y = np.repeat(pairs[:, 1], len(pairs))
        z = np.tile(pairs[:, 0], len(pairs))
        w = np.tile(pairs[:, 1], len(pairs))
    else:
        rng = np.random.default_rng(rng_seed)
        x, y, z, w = rng.integers(0, n, size=(4, n_samples))
    rxy = r[x, y]
    rzw = r[z, w]
    if beta >= 1.0:
        keep = (rxy > 0) & (rzw > 0)
        x, y, z, w, rxy, rzw = x[keep], y[keep], z[keep], w[keep], rxy[keep], rzw[keep]
    num = np.abs(rxy - rzw)
    cross = r[x, z] ** beta + r[y, w] ** beta
    den = (1.0 / beta) * np.maximum(rxy, rzw) ** (1.0 - beta) * cross
    ok = den > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(num[ok] / den[ok]))


def check_invariants(reg: RegularizedMetric, *, max_triangle_points: int = 200) -> dict:
    """Assert the regularization contracts; returns the measured slack.

    Checks the two-sided comparison with the base quasi-distance, symmetry,
    the zero diagonal, and (on clouds up to ``max_triangle_points`` points)
    the exhaustive triangle inequality for the alpha-th power.
    """
    d = reg.base.dist
    r = reg.rho_sharp
    c = reg.constants
    if not np.allclose(r, r.T, rtol=REL_TOL, atol=0):
        raise AssertionError("rho_# not symmetric")
    if np.any(np.diag(r) != 0):
        raise AssertionError("rho_# diagonal not zero")
    lo = d / c.c_rho ** 2
    hi = c.c_rho_tilde * d
    slack = 1.0 + REL_TOL
    if np.any(r > hi * slack) or np.any(r < lo / slack):
        raise AssertionError("two-sided comparison with the base distance fails")
    out = {"sandwich_ok": True, "triangle_checked": False, "triangle_defect": None}
    n = reg.n_points
    if n <= max_triangle_points and c.alpha_is_finite:
        p = r ** c.alpha
        chains = p[:, :, None] + p[None, :, :]   # chains[x, z, y] = p[x,z] + p[z,y]
        defect = float(np.max(p[:, None, :] - chains))
        if defect > REL_TOL * max(1.0, float(p.max())):
            raise AssertionError("snowflaked rho_# violates the triangle inequality")
        out["triangle_checked"] = True
        out["triangle_defect"] = defect
    return out


def load_space(doc) -> QuasiMetricSpace:
    """Build a space from the JSON document schema.

    Accepts ``{"points": [[...], ...]}`` (Euclidean) or
    ``{"matrix": [[...], ...]}`` (explicit quasi-distance); file paths and
    already-parsed dicts are both fine.
    """
    if isinstance(doc, (str, bytes)):
        with open(doc) as fh:
            doc = json.load(fh)
    if "points" in doc:
        return QuasiMetricSpace.from_points(doc["points"])
    if "matrix" in doc:
        return QuasiMetricSpace.from_matrix(doc["matrix"])
    raise QuasiMetricError("document needs a 'points' or 'matrix' field")
