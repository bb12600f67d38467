"""Sampled ADR sets with quadrature weights, ambient grids, and geometric diagnostics.

Built-in generators are planar (ambient dimension 2); kernels and
functionals downstream are written for general (m, d) and accept custom
clouds of any ambient dimension. The boundary measure sigma is represented
by per-sample quadrature weights, never by Hausdorff measure; the greedy
premeasure estimator below is a diagnostic only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from . import qspace
from .qspace import QuasiMetricConstants, QuasiMetricSpace, RegularizedMetric

__all__ = [
    "AdrSet",
    "AmbientGrid",
    "GeneratorError",
    "make_lipschitz_graph",
    "make_circle",
    "make_koch",
    "make_four_corners",
    "make_custom",
    "make_ambient_grid",
    "adr_constant",
    "beta2",
    "beta2_carleson_profile",
    "hausdorff_premeasure",
]

KOCH_DIM = math.log(4.0) / math.log(3.0)

# Largest cloud for which the dense O(n^3) regularization is attempted;
# beyond it the exact-euclidean fast path (alpha == 1 witness) is required.
DENSE_METRIC_CAP = 4608


class GeneratorError(ValueError):
    pass


class EuclideanSampleMetric:
    """On-demand rho_# for large Euclidean clouds with a ratio-2 witness.

    When a midpoint-exact collinear triple certifies the quasi-triangle
    constant 2, the snowflake exponent is 1 and chains cannot improve the
    metric, so rho_# is the Euclidean distance itself; rows are computed
    on demand instead of materializing the n-by-n matrix.
    """

    def __init__(self, coords: np.ndarray):
        self.coords = np.asarray(coords, dtype=np.float64)
        self.constants = QuasiMetricConstants(c_rho=2.0, c_rho_tilde=1.0, alpha=1.0)
        self._tree = cKDTree(self.coords)
        self._diam = _coords_diameter(self.coords)

    @property
    def alpha(self) -> float:
        return 1.0

    @property
    def n_points(self) -> int:
        return len(self.coords)

    def diam(self) -> float:
        return self._diam

    def row(self, i: int) -> np.ndarray:
        return np.linalg.norm(self.coords - self.coords[i], axis=1)

    def rows(self, idx) -> np.ndarray:
        return cdist(self.coords[np.asarray(idx, dtype=np.intp)], self.coords)

    def ball(self, i: int, r: float) -> np.ndarray:
        return np.asarray(self._tree.query_ball_point(self.coords[i], r * (1 - 1e-15)),
                          dtype=np.intp)


def _coords_diameter(coords: np.ndarray) -> float:
    # exact via the convex hull when possible, brute force on small clouds
    if len(coords) <= 2048:
        return float(cdist(coords, coords).max())
    try:
        from scipy.spatial import ConvexHull

        hull = coords[ConvexHull(coords).vertices]
    except Exception:
        hull = coords[:: max(1, len(coords) // 2048)]
    return float(cdist(hull, hull).max())


@dataclass
class AdrSet:
    """Samples of E with quadrature weights approximating sigma."""

    coords: np.ndarray
    weights: np.ndarray
    dim_d: float
    generator: str = "custom"
    lip_function: Optional[Callable] = None
    expected_total: Optional[float] = None   # closed-form sigma(E) when known
    adr_bound_doc: Optional[float] = None    # documented ADR constant bound
    _metric: object = field(default=None, repr=False)
    _tree: object = field(default=None, repr=False)

    def __post_init__(self):
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=np.float64))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.weights) != len(self.coords):
            raise GeneratorError("weights/coords length mismatch")
        if np.any(self.weights <= 0):
            raise GeneratorError("weights must be positive")
        if self.dim_d <= 0:
            raise GeneratorError("dimension must be positive")

    @property
    def n_samples(self) -> int:
        return len(self.coords)

    @property
    def ambient_dim(self) -> int:
        return self.coords.shape[1]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def cloud(self) -> QuasiMetricSpace:
        if self.n_samples > DENSE_METRIC_CAP:
            raise GeneratorError("cloud too large to materialize densely")
        return QuasiMetricSpace.from_points(self.coords)

    @property
    def kdtree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.coords)
        return self._tree

    def metric(self):
        """rho_# on the samples: dense and exact, or the certified fast path."""
        if self._metric is None:
            if self.n_samples <= DENSE_METRIC_CAP:
                self._metric = qspace.regularize(self.cloud)
            elif _lazy_witness(self.coords):
                self._metric = EuclideanSampleMetric(self.coords)
            else:
                raise GeneratorError(
                    "cloud too large for the dense scan and no ratio-2 "
                    "witness certifies the Euclidean fast path")
        return self._metric

    def min_spacing(self) -> float:
        d, _ = self.kdtree.query(self.coords, k=2)
        return float(d[:, 1].min())

    def resolvable_range(self) -> tuple[float, float]:
        """Radius window where the discrete measure can look ADR."""
        return 5.0 * self.min_spacing(), self.metric().diam()

    def sigma_ball(self, i: int, r: float) -> float:
        m = self.metric()
        if isinstance(m, EuclideanSampleMetric):
            return float(self.weights[m.ball(i, r)].sum())
        return float(self.weights[m.row(i) < r].sum())


def _lazy_witness(coords: np.ndarray) -> bool:
    d01 = np.linalg.norm(coords[:-2] - coords[1:-1], axis=1)
    d12 = np.linalg.norm(coords[1:-1] - coords[2:], axis=1)
    d02 = np.linalg.norm(coords[:-2] - coords[2:], axis=1)
    return bool(np.any(d02 >= (2.0 - 1e-12) * np.maximum(d01, d12)))


# ----------------------------------------------------------------------------
# generators


def make_lipschitz_graph(A: Callable[[np.ndarray], np.ndarray], lip_M: float,
                         half_width: float, n_samples: int) -> AdrSet:
    """Graph samples ((x_i, A(x_i))) on a uniform midpoint grid with arc-length weights."""
    if n_samples < 16:
        raise GeneratorError("need at least 16 samples")
    dx = 2.0 * half_width / n_samples
    x = -half_width + (np.arange(n_samples) + 0.5) * dx
    y = np.asarray(A(x), dtype=np.float64)
    if y.shape != x.shape:
        raise GeneratorError("graph function must map a grid to a grid")
    # Lipschitz spot check: adjacent pairs plus a seeded random batch
    rng = np.random.default_rng(1234)
    i = rng.integers(0, n_samples, size=256)
    j = rng.integers(0, n_samples, size=256)
    pairs_i = np.concatenate([np.arange(n_samples - 1), i])
    pairs_j = np.concatenate([np.arange(1, n_samples), j])
    keep = pairs_i != pairs_j
    num = np.abs(y[pairs_i[keep]] - y[pairs_j[keep]])
    den = np.abs(x[pairs_i[keep]] - x[pairs_j[keep]])
    if np.any(num > lip_M * den * (1 + 1e-9)):
        raise GeneratorError("Lipschitz spot-check failed")
    slope = np.gradient(y, x)
    w = np.sqrt(1.0 + slope ** 2) * dx
    # total arc length by fine quadrature of the same slope field
    expected = float(np.sum(np.sqrt(1.0 + slope ** 2)) * dx)
    return AdrSet(coords=np.column_stack([x, y]), weights=w, dim_d=1.0,
                  generator="graph", lip_function=A, expected_total=expected,
                  adr_bound_doc=2.0 * math.sqrt(1.0 + lip_M ** 2) + 0.5)


def make_circle(radius: float, n_samples: int) -> AdrSet:
    if radius <= 0:
        raise GeneratorError("radius must be positive")
    if n_samples < 16:
        raise GeneratorError("need at least 16 samples")
    t = 2.0 * np.pi * np.arange(n_samples) / n_samples
    coords = radius * np.column_stack([np.cos(t), np.sin(t)])
    w = np.full(n_samples, 2.0 * np.pi * radius / n_samples)
    return AdrSet(coords=coords, weights=w, dim_d=1.0, generator="circle",
                  expected_total=2.0 * np.pi * radius, adr_bound_doc=3.3)


def _koch_segments(generation: int) -> np.ndarray:
    rot = np.array([[0.5, -math.sqrt(3) / 2], [math.sqrt(3) / 2, 0.5]])
    segs = np.array([[[0.0, 0.0], [1.0, 0.0]]])
    for _ in range(generation):
        a = segs[:, 0]
        b = segs[:, 1]
        c = a + (b - a) / 3.0
        e = a + 2.0 * (b - a) / 3.0
        peak = c + (e - c) @ rot.T
        segs = np.concatenate([
            np.stack([a, c], axis=1),
            np.stack([c, peak], axis=1),
            np.stack([peak, e], axis=1),
            np.stack([e, b], axis=1),
        ], axis=0)
    return segs


def make_koch(generation: int) -> AdrSet:
    """Midpoints of the generation-g Koch curve segments, self-similar weights."""
    if generation < 0 or generation > 9:
        raise GeneratorError("generation must be in 0..9")
    segs = _koch_segments(generation)
    mids = segs.mean(axis=1)
    # restore the segment traversal order so collinear runs are consecutive
    w = np.full(len(mids), 4.0 ** (-generation))
    return AdrSet(coords=mids, weights=w, dim_d=KOCH_DIM, generator="koch",
                  expected_total=1.0, adr_bound_doc=6.0)


def make_four_corners(generation: int) -> AdrSet:
    """Corner-cell centers of the planar 1/4-Cantor construction (d = 1, non-UR)."""
    if generation < 0 or generation > 8:
        raise GeneratorError("generation must be in 0..8")
    corners = np.zeros((1, 2))
    side = 1.0
    for _ in range(generation):
        side /= 4.0
        offs = np.array([[0.0, 0.0], [3.0 * side, 0.0],
                         [0.0, 3.0 * side], [3.0 * side, 3.0 * side]])
        corners = (corners[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    centers = corners + side / 2.0
    w = np.full(len(centers), 4.0 ** (-generation))
    return AdrSet(coords=centers, weights=w, dim_d=1.0, generator="cantor4",
                  expected_total=1.0, adr_bound_doc=8.0)


def make_custom(doc, weights=None, d: float = None) -> AdrSet:
    """Custom cloud from the qspace JSON schema plus a weights array and d."""
    if isinstance(doc, dict) and "weights" in doc:
        weights = doc["weights"]
    if isinstance(doc, dict) and "d" in doc:
        d = doc["d"]
    sp = qspace.load_space(doc)
    if sp.coords is None:
        raise GeneratorError("custom ADR sets need coordinates")
    if weights is None or d is None:
        raise GeneratorError("custom ADR sets need 'weights' and 'd'")
    return AdrSet(coords=sp.coords, weights=np.asarray(weights, dtype=float),
                  dim_d=float(d), generator="custom")


# ----------------------------------------------------------------------------
# ambient quadrature grid


@dataclass
class AmbientGrid:
    """Dyadic quadrature cells for the complement of E, graded by delta_E.

    Cells meeting E (delta_E at the center not exceeding the cell diameter)
    are discarded, so every retained cell carries a strictly positive
    delta_E and the integrands downstream stay bounded on it.
    """

    centers: np.ndarray      # (n, D)
    sides: np.ndarray        # (n, D)
    measures: np.ndarray     # (n,) product of sides
    delta: np.ndarray        # (n,) distance to the E samples at the center
    ambient_dim_m: float
    region: tuple
    max_cell: float
    discarded_measure: float
    discarded_near: float    # largest delta_E seen on a discarded cell

    @property
    def n_cells(self) -> int:
        return len(self.centers)

    def diameters(self) -> np.ndarray:
        return np.linalg.norm(self.sides, axis=1)


def make_ambient_grid(E: AdrSet, region, max_cell: float,
                      refine_near_E: bool = True, extra_levels: int = 6) -> AmbientGrid:
    """Dyadic subdivision of a box, Whitney-graded near E.

    A cell splits while its diameter exceeds ``max_cell``, and (when
    ``refine_near_E``) while it exceeds half the center's delta_E, down to
    a floor ``max_cell / 2**extra_levels``; cells whose center sits within
    one diameter of E are then discarded. Cell measure is geometric volume.
    """
    lo = np.asarray(region[0], dtype=np.float64)
    hi = np.asarray(region[1], dtype=np.float64)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise GeneratorError("region must be a nondegenerate box")
    bb_lo = E.coords.min(axis=0)
    bb_hi = E.coords.max(axis=0)
    if np.any(bb_lo < lo - 1e-12) or np.any(bb_hi > hi + 1e-12):
        raise GeneratorError("region must contain the bounding box of E")
    dim = len(lo)
    tree = E.kdtree
    min_side = float(max_cell) / 2 ** extra_levels

    centers = [((lo + hi) / 2.0)[None, :]]
    sides = [(hi - lo)[None, :]]
    keep_centers, keep_sides = [], []
    disc_measure = 0.0
    disc_near = 0.0
    offsets = np.array(np.meshgrid(*([[-0.25, 0.25]] * dim), indexing="ij"))
    offsets = offsets.reshape(dim, -1).T            # (2^D, D) child offsets

    cur_c = centers[0]
    cur_s = sides[0]
    while len(cur_c):
        diam = np.linalg.norm(cur_s, axis=1)
        delta, _ = tree.query(cur_c)
        split = diam > max_cell
        if refine_near_E:
            split |= (diam > delta / 2.0) & (cur_s.max(axis=1) > min_side * (1 + 1e-12))
        done_c, done_s, done_diam, done_delta = (
            cur_c[~split], cur_s[~split], diam[~split], delta[~split])
        near = done_delta <= done_diam
        disc_measure += float(np.prod(done_s[near], axis=1).sum())
        if np.any(near):
            disc_near = max(disc_near, float(done_delta[near].max()))
        keep_centers.append(done_c[~near])
        keep_sides.append(done_s[~near])
        parent_c, parent_s = cur_c[split], cur_s[split]
        if len(parent_c):
            cur_c = (parent_c[:, None, :] + offsets[None, :, :] * parent_s[:, None, :]
                     ).reshape(-1, dim)
            cur_s = np.repeat(parent_s / 2.0, len(offsets), axis=0)
        else:
            cur_c = np.empty((0, dim))
            cur_s = np.empty((0, dim))

    centers = np.concatenate(keep_centers, axis=0)
    sides = np.concatenate(keep_sides, axis=0)
    if len(centers) == 0:
        raise GeneratorError("empty grid: region or resolution too small")
    measures = np.prod(sides, axis=1)
    delta, _ = tree.query(centers)
    return AmbientGrid(centers=centers, sides=sides, measures=measures,
                       delta=delta, ambient_dim_m=float(dim),
                       region=(tuple(lo), tuple(hi)), max_cell=float(max_cell),
                       discarded_measure=disc_measure, discarded_near=disc_near)


# ----------------------------------------------------------------------------
# diagnostics


def adr_constant(E: AdrSet, n_probes: int = 64, rng_seed: int = 0) -> float:
    """Worst two-sided ratio sigma(ball)/r^d over sampled centers and radii."""
    if n_probes < 10:
        raise GeneratorError("need at least 10 probes")
    rng = np.random.default_rng(rng_seed)
    r_lo, r_hi = E.resolvable_range()
    if r_lo >= r_hi:
        raise GeneratorError("no resolvable radius range")
    worst = 1.0
    idx = rng.integers(0, E.n_samples, size=n_probes)
    radii = np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), size=n_probes))
    for i, r in zip(idx, radii):
        s = E.sigma_ball(int(i), float(r)) / r ** E.dim_d
        worst = max(worst, s, 1.0 / s if s > 0 else math.inf)
    return float(worst)


def beta2(E: AdrSet, x: int, t: float) -> float:
    """Scale-normalized L2 flatness of E in the ball B(x, t).

    Weighted total least squares realizes the infimum over affine lines of
    the L2 objective; the residual is the scatter trace minus the top
    eigenvalue, normalized per the (d+2)-homogeneous convention.
    """
    m = E.metric()
    if isinstance(m, EuclideanSampleMetric):
        members = m.ball(x, t)
    else:
        members = np.nonzero(m.row(x) < t)[0]
    if len(members) < 2:
        raise GeneratorError("fewer than 2 points in the ball")
    pts = E.coords[members]
    w = E.weights[members]
    centroid = np.average(pts, axis=0, weights=w)
    diffs = pts - centroid
    scatter = (w[:, None] * diffs).T @ diffs
    eig = np.linalg.eigvalsh(scatter)
    resid = float(eig[:-1].sum())
    return math.sqrt(max(resid, 0.0) / t ** (E.dim_d + 2.0))


def beta2_carleson_profile(E: AdrSet, x0: int, r: float, n_scales: int = 6) -> float:
    """Dyadic-in-t surrogate of the beta-number Carleson sum over B(x0, r)."""
    m = E.metric()
    r_lo, _ = E.resolvable_range()
    total = 0.0
    for j in range(n_scales):
        t = r * 2.0 ** (-j)
        if t < r_lo:
            break
        if isinstance(m, EuclideanSampleMetric):
            members = m.ball(x0, t)
        else:
            members = np.nonzero(m.row(x0) < t)[0]
        inner = 0.0
        for i in members:
            try:
                inner += beta2(E, int(i), t) ** 2 * E.weights[i]
            except GeneratorError:
                continue
        total += inner * math.log(2.0)
    return total / r ** E.dim_d


def hausdorff_premeasure(points, eps: float, d: float) -> float:
    """Greedy cover at scale eps; a heuristic upper-bound estimator only."""
    if eps <= 0:
        raise GeneratorError("eps must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    tree = cKDTree(pts)
    uncovered = np.ones(len(pts), dtype=bool)
    total = 0.0
    for i in range(len(pts)):
        if not uncovered[i]:
            continue
        ball = np.asarray(tree.query_ball_point(pts[i], eps), dtype=np.intp)
        grabbed = ball[uncovered[ball]]
        uncovered[grabbed] = False
        if len(grabbed) > 1:
            diam = float(cdist(pts[grabbed], pts[grabbed]).max())
        else:
            diam = 0.0
        total += diam ** d
    return total


def check_adr_invariants(E: AdrSet, n_probes: int = 32, rng_seed: int = 1) -> dict:
    """Generator totals and the two-sided ADR bound at the documented constant."""
    out = {"total_weight": E.total_weight}
    if E.expected_total is not None:
        if not math.isclose(E.total_weight, E.expected_total, rel_tol=1e-6):
            raise AssertionError("total weight deviates from the closed form")
    if E.adr_bound_doc is not None:
        c = adr_constant(E, n_probes=n_probes, rng_seed=rng_seed)
        out["adr_constant"] = c
        if c > E.adr_bound_doc:
            raise AssertionError(
                f"ADR constant {c:.3f} above documented bound {E.adr_bound_doc}")
    return out
