"""Point-versus-curve classification of section clouds.

A trajectory confined to an invariant 2-torus meets a generic 2-plane
in isolated points; a trajectory filling a 3-dimensional region meets
it in curves. The classifier codifies that dichotomy with two
independent measurements and a conservative middle band:

* single-linkage clusters at a scale set by the cloud itself
  (``link_factor`` times the median nearest-neighbour distance), whose
  diameters separate tight clumps from extended filaments;
* a correlation-dimension estimate (slope of log pair-count versus
  log radius) over the scaling window between the slab noise floor
  and a quarter of the cloud diameter.

Curves are only declared when both measurements agree the cloud is
extended and 1-dimensional; Points only when both agree it is
clumped and 0-dimensional; anything else is Inconclusive. Distances
are wrap-aware on angular coordinates throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .angles import pairwise_sq_distances
from .errors import DegenerateWindow

__all__ = [
    "VerdictLabel",
    "Verdict",
    "ClassifierConfig",
    "cluster_points",
    "correlation_dimension",
    "classify_points",
    "classify",
    "obstruction_found",
]

_NO_MASK = (False, False, False, False)
_BLOCK = 512
# floor for the linkage scale so exactly coincident points still join
_MIN_LINK = 1e-12
# a Curves verdict is trusted only if the slab functional actually swept
# past its window; spans below this many half-widths mean the coordinate
# froze near the level and the cut degenerated
_SPAN_GUARD = 2.0


class VerdictLabel(enum.Enum):
    EMPTY = "empty"
    POINTS = "points"
    CURVES = "curves"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Verdict:
    """Classification outcome with the diagnostics that produced it."""

    label: VerdictLabel
    n_points: int
    n_clusters: int
    max_cluster_diameter: float
    correlation_dimension_estimate: float
    link_distance: float

    def as_record(self):
        """Plain-type dict for JSON serialization.

        Diagnostics that were never computed (NaN on Empty verdicts)
        serialize as null.
        """
        def scrub(value):
            return value if math.isfinite(value) else None

        return {
            "label": self.label.value,
            "n_points": self.n_points,
            "n_clusters": self.n_clusters,
            "max_cluster_diameter": scrub(self.max_cluster_diameter),
            "correlation_dimension_estimate":
                scrub(self.correlation_dimension_estimate),
            "link_distance": scrub(self.link_distance),
        }


@dataclass(frozen=True)
class ClassifierConfig:
    n_min: int = 10
    link_factor: float = 5.0
    point_diam_factor: float = 10.0
    curve_diam_factor: float = 50.0
    dim_lo: float = 0.3
    dim_hi: float = 0.7
    max_cloud: int = 4000

    def __post_init__(self):
        if self.n_min < 1:
            raise ValueError("n_min must be at least 1")
        if not (0.0 < self.dim_lo < self.dim_hi):
            raise ValueError("need 0 < dim_lo < dim_hi")
        for name in ("link_factor", "point_diam_factor",
                     "curve_diam_factor"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_cloud < 2:
            raise ValueError("max_cloud must be at least 2")


def _subsample(points, cap):
    """Deterministic, permutation-invariant thinning to at most cap rows."""
    n = points.shape[0]
    if n <= cap:
        return points
    order = np.lexsort(points.T)
    stride = int(math.ceil(n / cap))
    return points[order[::stride]]


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:
            p[i], i = root, p[i]
        return root

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            if rj < ri:
                ri, rj = rj, ri
            self.parent[rj] = ri


def cluster_points(points, delta, angular_mask=_NO_MASK):
    """Single-linkage components at linking distance delta.

    Returns a list of index arrays, one per cluster, ordered by their
    smallest member index. Two points are linked when their wrap-aware
    distance is strictly below delta.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if n == 0:
        return []
    uf = _UnionFind(n)
    thresh = delta * delta
    for i0 in range(0, n, _BLOCK):
        i1 = min(i0 + _BLOCK, n)
        d2 = pairwise_sq_distances(points[i0:i1], points[:i1], angular_mask)
        rows, cols = np.nonzero(d2 < thresh)
        for r, c in zip(rows.tolist(), cols.tolist()):
            gi = i0 + r
            if c < gi:
                uf.union(gi, c)
    groups = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return [np.array(groups[root]) for root in sorted(groups)]


def _cluster_diameter(points, angular_mask):
    m = points.shape[0]
    if m < 2:
        return 0.0
    worst = 0.0
    for i0 in range(0, m, _BLOCK):
        i1 = min(i0 + _BLOCK, m)
        d2 = pairwise_sq_distances(points[i0:i1], points, angular_mask)
        worst = max(worst, float(d2.max()))
    return math.sqrt(worst)


def _median_nn_distance(points, angular_mask):
    n = points.shape[0]
    nn = np.empty(n)
    for i0 in range(0, n, _BLOCK):
        i1 = min(i0 + _BLOCK, n)
        d2 = pairwise_sq_distances(points[i0:i1], points, angular_mask)
        for r in range(i1 - i0):
            d2[r, i0 + r] = np.inf
        nn[i0:i1] = d2.min(axis=1)
    return float(np.sqrt(np.median(nn)))


def correlation_dimension(points, slab_halfwidth, angular_mask=_NO_MASK,
                          window=None, n_radii=12):
    """Correlation-dimension estimate of a cloud.

    Least-squares slope of log C(r) against log r over n_radii
    log-spaced radii in the scaling window. The default window is
    [3 * slab_halfwidth, diameter / 4]: below the lower edge the cloud
    is dominated by slab thickness, above the upper edge by its
    overall extent. Returns (estimate, (r_lo, r_hi)).

    Raises DegenerateWindow when the window is empty (the cloud is not
    much bigger than the slab) or when too few radii have any pairs.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n < 2:
        raise DegenerateWindow("need at least two points")
    if window is None:
        diam = _cluster_diameter(points, angular_mask)
        r_lo, r_hi = 3.0 * slab_halfwidth, diam / 4.0
    else:
        r_lo, r_hi = float(window[0]), float(window[1])
    if r_hi <= r_lo:
        raise DegenerateWindow(
            f"scaling window [{r_lo:.3g}, {r_hi:.3g}] is empty")
    radii = np.exp(np.linspace(math.log(r_lo), math.log(r_hi), n_radii))
    sq_edges = radii * radii
    counts = np.zeros(n_radii)
    for i0 in range(0, n, _BLOCK):
        i1 = min(i0 + _BLOCK, n)
        d2 = pairwise_sq_distances(points[i0:i1], points[:i1], angular_mask)
        tri = []
        for r in range(i1 - i0):
            tri.append(d2[r, :i0 + r])
        flat = np.concatenate(tri) if tri else np.zeros(0)
        counts += np.searchsorted(np.sort(flat), sq_edges, side="left")
    valid = counts > 0
    if valid.sum() < 4:
        raise DegenerateWindow("too few populated radii in the window")
    x = np.log(radii[valid])
    ylog = np.log(counts[valid])
    slope = float(np.polyfit(x, ylog, 1)[0])
    return slope, (float(r_lo), float(r_hi))


def classify_points(points, slab_halfwidth, angular_mask=_NO_MASK,
                    config=None):
    """Classify a raw point cloud; see `classify` for the cloud variant."""
    cfg = config if config is not None else ClassifierConfig()
    points = np.asarray(points, dtype=float)
    n_total = points.shape[0]
    if n_total < cfg.n_min:
        return Verdict(VerdictLabel.EMPTY, n_total, 0, 0.0,
                       math.nan, math.nan)
    points = _subsample(points, cfg.max_cloud)

    delta = max(cfg.link_factor * _median_nn_distance(points, angular_mask),
                _MIN_LINK)
    clusters = cluster_points(points, delta, angular_mask)
    diams = [_cluster_diameter(points[idx], angular_mask)
             for idx in clusters]
    max_diam = max(diams)

    try:
        dim, _ = correlation_dimension(points, slab_halfwidth, angular_mask)
    except DegenerateWindow:
        # structure below the noise scale is point-like by construction
        dim = 0.0

    label = VerdictLabel.INCONCLUSIVE
    if max_diam > cfg.curve_diam_factor * slab_halfwidth \
            and dim >= cfg.dim_hi:
        label = VerdictLabel.CURVES
    elif max_diam <= cfg.point_diam_factor * slab_halfwidth \
            and dim <= cfg.dim_lo:
        label = VerdictLabel.POINTS
    return Verdict(label, n_total, len(clusters), max_diam, dim, delta)


def classify(cloud, config=None):
    """Verdict for a SectionCloud, using its plane's slab and mask.

    A Curves verdict is additionally required to come from a plane
    whose slab actually cut the crossing set: if the second functional
    never strayed beyond ``_SPAN_GUARD`` slab half-widths over all
    refined crossings (``cloud.slab_span``), the "section" degenerates
    to a plain codimension-1 section, whose curves carry no
    obstruction content, and the verdict is downgraded to
    Inconclusive. Clouds without span data are not downgraded.
    """
    verdict = classify_points(cloud.points, cloud.plane.slab_halfwidth,
                              cloud.plane.angular_mask, config)
    if verdict.label is VerdictLabel.CURVES \
            and cloud.slab_span <= _SPAN_GUARD * cloud.plane.slab_halfwidth:
        verdict = replace(verdict, label=VerdictLabel.INCONCLUSIVE)
    return verdict


def obstruction_found(verdicts):
    """True when any plane's verdict is Curves.

    Point-like or empty sections on every plane never certify
    integrability; they only report that no obstruction was found.
    """
    return any(v.label is VerdictLabel.CURVES for v in verdicts)
