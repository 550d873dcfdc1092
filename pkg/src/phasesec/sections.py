"""Intersection of long trajectories with affine 2-planes in 4-space.

A 1-dimensional trajectory generically misses a 2-plane in a
4-dimensional space, so the intersection is realized numerically in
two stages: detect transversal crossings of the first plane equation
(a codimension-1 event along the dense interpolant), then keep the
refined crossing point only when the second plane equation holds
within a slab of half-width ``slab_halfwidth``. Clouds collected this
way make the dimension dichotomy visible: a trajectory filling a
2-torus leaves isolated points, one filling a 3-dimensional region
leaves curves of thickness comparable to the slab.

Angular coordinates are handled on the torus throughout: crossing
detection evaluates the plane functional on a within-step lifted
(continuous) copy of the angles and folds the value by the
functional's angular period, so a level is crossed whenever its
wrapped representative is, with no spurious events at the seam.

A sign change is only accepted when the functional reaches
``min_crossing_height`` (times the row scale) on at least one side of
the bracket. A conserved quantity sitting exactly on its level
otherwise produces an endless stream of noise-amplitude recrossings
that would assemble into a fake curve; with the floor such planes
yield empty clouds instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np

from .angles import TWO_PI, unwrap_near, wrap_coords

__all__ = [
    "PlaneSpec",
    "SectionCloud",
    "SectionCollector",
    "Crossing",
    "plane_basis",
    "plane_coords",
    "default_planes",
    "detect_crossing",
    "collect_section",
    "collect_sections",
    "FunctionSegment",
    "function_trajectory",
]

_RANK_TOL = 1e-10
_NO_MASK = (False, False, False, False)


@dataclass(frozen=True)
class PlaneSpec:
    """An affine 2-plane given by two independent linear equations.

    Each functional is a 5-tuple (a, b, c, d, e) standing for the
    equation a*x1 + b*x2 + c*x3 + d*x4 = e over the four phase
    coordinates. The first functional is the crossing detector; the
    second is tested within ``slab_halfwidth`` of its level.
    ``angular_mask`` marks which coordinates are circular.
    """

    functional1: tuple
    functional2: tuple
    slab_halfwidth: float = 1e-3
    angular_mask: tuple = _NO_MASK

    def __post_init__(self):
        f1 = tuple(float(v) for v in self.functional1)
        f2 = tuple(float(v) for v in self.functional2)
        if len(f1) != 5 or len(f2) != 5:
            raise ValueError("functionals must have 5 entries "
                             "(4 coefficients and an offset)")
        mask = tuple(bool(v) for v in self.angular_mask)
        if len(mask) != 4:
            raise ValueError("angular_mask must have 4 entries")
        object.__setattr__(self, "functional1", f1)
        object.__setattr__(self, "functional2", f2)
        object.__setattr__(self, "angular_mask", mask)
        if not self.slab_halfwidth > 0.0:
            raise ValueError("slab_halfwidth must be positive")
        rows = np.array([f1[:4], f2[:4]])
        # rank-2 check on the 2x4 coefficient matrix
        s = np.linalg.svd(rows, compute_uv=False)
        if s[1] <= _RANK_TOL * max(s[0], 1.0):
            raise ValueError("plane equations are linearly dependent")

    @property
    def rows(self):
        return np.array([self.functional1[:4], self.functional2[:4]])

    @property
    def offsets(self):
        return np.array([self.functional1[4], self.functional2[4]])

    def residuals(self, point):
        """Wrap-aware |functional - offset| pair at a wrapped point.

        For angular coordinates the residual is minimized over 2*pi
        shifts, so a level just across the seam is as close as it is
        on the torus.
        """
        point = np.asarray(point, dtype=float)
        out = np.empty(2)
        for k, func in enumerate((self.functional1, self.functional2)):
            row = np.array(func[:4])
            base = float(row @ point) - func[4]
            ang = [i for i in range(4)
                   if self.angular_mask[i] and row[i] != 0.0]
            best = abs(base)
            for shifts in itertools.product((-1.0, 0.0, 1.0), repeat=len(ang)):
                if not any(shifts):
                    continue
                r = base
                for i, n in zip(ang, shifts):
                    r += TWO_PI * n * row[i]
                if abs(r) < best:
                    best = abs(r)
            out[k] = best
        return out

    def halved(self):
        """The same plane with the slab half as wide."""
        return replace(self, slab_halfwidth=0.5 * self.slab_halfwidth)


@lru_cache(maxsize=512)
def plane_basis(plane: PlaneSpec):
    """Deterministic orthonormal basis (2, 4) of the plane's directions.

    Candidate directions are the coordinate axes ordered by combined
    coefficient magnitude (smallest first, index as tie-break), each
    projected onto the null space of the two equation rows and passed
    through Gram-Schmidt; the first two survivors form the basis. For
    axis-parallel planes this yields exact coordinate vectors.
    """
    rows = plane.rows
    q, _ = np.linalg.qr(rows.T)
    q = q.T  # orthonormal row space
    weight = np.abs(rows).sum(axis=0)
    order = sorted(range(4), key=lambda i: (weight[i], i))
    basis = []
    for i in order:
        v = np.zeros(4)
        v[i] = 1.0
        v = v - q.T @ (q @ v)
        for b in basis:
            v = v - (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-10:
            basis.append(v / norm)
        if len(basis) == 2:
            break
    if len(basis) != 2:
        raise ValueError("plane basis construction failed")
    return np.array(basis)


def plane_coords(point, plane: PlaneSpec):
    """Coordinates of a point in the plane's orthonormal basis."""
    return plane_basis(plane) @ np.asarray(point, dtype=float)


def default_planes(reference_point, slab_halfwidth=1e-3,
                   angular_mask=_NO_MASK):
    """The six axis-parallel coordinate 2-planes through a point.

    One plane per pair of fixed coordinates. When a pair mixes an
    angular and a non-angular coordinate, the non-angular row is put
    first (it is the crossing detector): an angle winds monotonically
    for generic trajectories, and detecting on it while the partner
    row is a conserved rate sitting exactly on its level would accept
    every winding pass, turning an invariant torus into a fake curve.
    Detecting on the rate makes such degenerate planes come out empty
    instead. For transversal dynamics both orderings sample the same
    plane.
    """
    ref = np.asarray(reference_point, dtype=float)
    if ref.shape != (4,):
        raise ValueError("reference point must have 4 coordinates")
    mask = tuple(bool(v) for v in angular_mask)
    planes = []
    for i, j in itertools.combinations(range(4), 2):
        rows = []
        for k in (i, j):
            coef = [0.0, 0.0, 0.0, 0.0]
            coef[k] = 1.0
            rows.append(tuple(coef) + (float(ref[k]),))
        if mask[i] and not mask[j]:
            rows.reverse()
        planes.append(PlaneSpec(functional1=rows[0], functional2=rows[1],
                                slab_halfwidth=slab_halfwidth,
                                angular_mask=mask))
    return planes


@dataclass
class SectionCloud:
    """Accepted intersection points of one trajectory with one plane.

    ``slab_span`` is the largest distance from the slab functional's
    level seen over all refined crossings, accepted or not. When it
    stays comparable to the slab half-width the slab never actually
    cut the crossing set (the second functional barely moves along
    the trajectory) and a curve-shaped cloud is a sectioning artifact
    rather than evidence; the classifier uses this to refuse Curves
    verdicts on such degenerate planes. Hand-built clouds default to
    infinity, which disables the guard.
    """

    plane: PlaneSpec
    times: np.ndarray
    points: np.ndarray
    plane_points: np.ndarray
    crossings_tested: int
    trajectory_time: float
    slab_span: float = math.inf

    @property
    def n_points(self):
        return int(self.points.shape[0])

    def refiltered(self, slab_halfwidth):
        """The same crossings re-filtered at a narrower slab.

        The stored points already satisfy the crossing equation
        exactly, so shrinking the slab only re-tests the second
        functional; no re-integration is involved.
        """
        if slab_halfwidth > self.plane.slab_halfwidth:
            raise ValueError("can only refilter to a narrower slab")
        new_plane = replace(self.plane, slab_halfwidth=slab_halfwidth)
        if self.n_points == 0:
            keep = np.zeros(0, dtype=bool)
        else:
            res = np.array([new_plane.residuals(p)[1] for p in self.points])
            keep = res <= slab_halfwidth
        return SectionCloud(
            plane=new_plane,
            times=self.times[keep] if self.n_points else self.times,
            points=self.points[keep] if self.n_points else self.points,
            plane_points=(self.plane_points[keep] if self.n_points
                          else self.plane_points),
            crossings_tested=self.crossings_tested,
            trajectory_time=self.trajectory_time,
            slab_span=self.slab_span)


class Crossing(NamedTuple):
    t: float
    point: np.ndarray


class _PlaneState:
    """Mutable per-plane accumulator used by the collector."""

    __slots__ = ("plane", "row1", "off1", "period", "scale", "loc_tol",
                 "floor", "times", "points", "tested", "full", "last_t",
                 "span")

    def __init__(self, plane, loc_tol_scale, min_crossing_height):
        self.plane = plane
        self.row1 = np.array(plane.functional1[:4])
        self.off1 = plane.functional1[4]
        ang = [i for i in range(4)
               if plane.angular_mask[i] and self.row1[i] != 0.0]
        # fold period of the detector row; only a single angular
        # coefficient gives a one-dimensional level lattice
        self.period = TWO_PI * self.row1[ang[0]] if len(ang) == 1 else 0.0
        self.scale = 1.0 + abs(self.off1) + float(np.abs(self.row1).sum())
        self.loc_tol = loc_tol_scale * self.scale
        self.floor = min_crossing_height * self.scale
        self.times = []
        self.points = []
        self.tested = 0
        self.full = False
        self.last_t = None
        self.span = 0.0


class SectionCollector:
    """Observer that accumulates plane sections of one trajectory.

    Feed it accepted integrator samples (it is directly usable as the
    ``observer`` argument of ``integrate_trajectory``); call
    ``clouds()`` afterwards. ``phase_map`` converts the integrator
    state to the four phase coordinates; identity when omitted.

    All planes must share one ``angular_mask``, which is also used to
    lift the phase coordinates continuously inside each step.
    """

    #: interior checkpoints of each step used to bracket sign changes.
    #: Adaptive steps keep the phase displacement per step small, so
    #: two checkpoints bound the within-step variation; fast winding of
    #: angular detectors is handled separately by period folding.
    CHECKPOINTS = (0.5, 1.0)

    def __init__(self, planes, phase_map=None, max_points=100_000,
                 max_crossings=None, loc_tol_scale=1e-12,
                 min_crossing_height=1e-4, phase_map_many=None):
        planes = list(planes)
        if not planes:
            raise ValueError("need at least one plane")
        masks = {p.angular_mask for p in planes}
        if len(masks) != 1:
            raise ValueError("all planes must share one angular_mask")
        self._mask = np.array(planes[0].angular_mask, dtype=bool)
        self._ang = np.nonzero(self._mask)[0]
        self._phase = phase_map
        self._phase_many = phase_map_many
        self._planes = [_PlaneState(p, loc_tol_scale, min_crossing_height)
                        for p in planes]
        # detector rows of every plane stacked, so one matrix product
        # evaluates all crossing functionals at all checkpoints
        self._rows_t = np.array([ps.row1 for ps in self._planes]).T
        self._offs = np.array([ps.off1 for ps in self._planes])
        self._max_points = int(max_points)
        self._max_crossings = max_crossings
        self._n_accepted = 0
        self._time = 0.0
        self._sigmas = np.array(self.CHECKPOINTS)
        # wrapped phase at the end of the previous step; saves one
        # phase-map evaluation per step on contiguous samples
        self._last_t1 = None
        self._last_raw = None

    def _phase_of(self, y):
        return np.asarray(y, dtype=float) if self._phase is None \
            else np.asarray(self._phase(y), dtype=float)

    def observe(self, sample) -> bool:
        dense = sample.dense
        self._time += sample.t1 - sample.t0

        lifts = np.empty((len(self.CHECKPOINTS) + 1, 4))
        if self._last_t1 is not None and sample.t0 == self._last_t1:
            lifts[0] = self._last_raw
        else:
            lifts[0] = self._phase_of(sample.y0)
        raw = dense.eval_many(self._sigmas)
        if self._phase_many is not None:
            lifts[1:] = self._phase_many(raw)
        elif self._phase is None:
            lifts[1:] = raw
        else:
            for k in range(len(self.CHECKPOINTS)):
                lifts[k + 1] = self._phase(raw[k])
        self._last_t1 = sample.t1
        self._last_raw = lifts[-1].copy()
        ang = self._ang
        if ang.size:
            # chained continuous lift of the angular columns
            a = lifts[:, ang]
            d = a[1:] - a[:-1]
            d -= TWO_PI * np.rint(d / TWO_PI)
            lifts[1:, ang] = a[0] + np.cumsum(d, axis=0)

        F = (lifts @ self._rows_t - self._offs).tolist()
        sig = (0.0,) + self.CHECKPOINTS
        stop = True
        for j, ps in enumerate(self._planes):
            if ps.full:
                continue
            stop = False
            period = ps.period
            if period == 0.0:
                fa = F[0][j]
                for k in range(len(self.CHECKPOINTS)):
                    fb = F[k + 1][j]
                    if fa * fb < 0.0 \
                            and max(abs(fa), abs(fb)) >= ps.floor:
                        ps.tested += 1
                        self._refine(ps, dense, sig[k], sig[k + 1],
                                     lifts[k], fa, fb)
                    fa = fb
            else:
                for k in range(len(self.CHECKPOINTS)):
                    fa = F[k][j]
                    fb = F[k + 1][j]
                    m = round(fa / period)
                    if m != 0:
                        fa -= m * period
                        fb -= m * period
                    if abs(fb - fa) > 0.45 * abs(period):
                        self._scan_interval(ps, dense, sig[k], sig[k + 1],
                                            lifts[k], F[k][j], F[k + 1][j], 0)
                    elif fa * fb < 0.0 \
                            and max(abs(fa), abs(fb)) >= ps.floor:
                        ps.tested += 1
                        self._refine(ps, dense, sig[k], sig[k + 1],
                                     lifts[k], fa, fb)
        if self._max_crossings is not None \
                and self._n_accepted >= self._max_crossings:
            return True
        return stop

    __call__ = observe

    @property
    def n_accepted(self):
        """Accepted points so far, summed over all planes."""
        return self._n_accepted

    def _scan_interval(self, ps, dense, sa, sb, la, fa, fb, depth):
        if ps.period != 0.0:
            k = float(round(fa / ps.period))
            if k != 0.0:
                fa -= k * ps.period
                fb -= k * ps.period
            if abs(fb - fa) > 0.45 * abs(ps.period):
                if depth >= 6:
                    return
                sm = 0.5 * (sa + sb)
                lm = unwrap_near(self._phase_of(dense.eval(sm)), la,
                                 self._mask)
                fm = float(lm @ ps.row1) - ps.off1
                self._scan_interval(ps, dense, sa, sm, la,
                                    fa + k * ps.period, fm, depth + 1)
                self._scan_interval(ps, dense, sm, sb, lm,
                                    fm, fb + k * ps.period, depth + 1)
                return
        if not (fa * fb < 0.0):
            return
        if max(abs(fa), abs(fb)) < ps.floor:
            return
        ps.tested += 1
        self._refine(ps, dense, sa, sb, la, fa, fb)

    def _refine(self, ps, dense, sa, sb, la, fa, fb):
        # regula falsi with Illinois weighting on the folded functional
        # along the lifted phase path; midpoint fallback keeps the
        # bracket shrinking on pathological shapes
        level = ps.off1 + (round((float(la @ ps.row1) - ps.off1) / ps.period)
                           * ps.period if ps.period != 0.0 else 0.0)
        tol = 0.5 * ps.loc_tol
        lm = la
        fm = fa
        side = 0
        for _ in range(80):
            width = sb - sa
            denom = fb - fa
            if denom != 0.0:
                sm = sa - fa * width / denom
                gap = 0.01 * width
                if not (sa + gap <= sm <= sb - gap):
                    sm = sa + 0.5 * width
            else:
                sm = sa + 0.5 * width
            lm = unwrap_near(self._phase_of(dense.eval(sm)), la, self._mask)
            fm = float(lm @ ps.row1) - level
            if abs(fm) <= tol or width < 1e-15:
                break
            if fa * fm < 0.0:
                sb, fb = sm, fm
                if side == 1:
                    fa *= 0.5
                side = 1
            else:
                sa, fa, la = sm, fm, lm
                if side == -1:
                    fb *= 0.5
                side = -1
        t_cross = dense.t0 + 0.5 * (sa + sb) * dense.h
        if ps.last_t is not None \
                and abs(t_cross - ps.last_t) < 1e-7 * (1.0 + abs(t_cross)):
            return
        ps.last_t = t_cross
        point = wrap_coords(lm, self._mask)
        res = ps.plane.residuals(point)
        if res[1] > ps.span:
            ps.span = res[1]
        if res[1] > ps.plane.slab_halfwidth:
            return
        assert res[0] <= ps.loc_tol, "crossing refinement out of tolerance"
        ps.times.append(t_cross)
        ps.points.append(point)
        self._n_accepted += 1
        if len(ps.points) >= self._max_points:
            ps.full = True

    def clouds(self):
        out = []
        for ps in self._planes:
            pts = (np.array(ps.points) if ps.points
                   else np.zeros((0, 4)))
            times = np.array(ps.times) if ps.times else np.zeros(0)
            basis = plane_basis(ps.plane)
            pp = pts @ basis.T if len(pts) else np.zeros((0, 2))
            out.append(SectionCloud(
                plane=ps.plane, times=times, points=pts, plane_points=pp,
                crossings_tested=ps.tested, trajectory_time=self._time,
                slab_span=ps.span))
        return out


def detect_crossing(dense, plane: PlaneSpec, phase_map=None,
                    loc_tol_scale=1e-12,
                    min_crossing_height=1e-4) -> Optional[Crossing]:
    """First crossing of the plane's detector equation on one segment.

    Returns the refined crossing (time and wrapped phase point) or
    None if the functional does not change sign along the segment.
    The slab filter is NOT applied here; this is the raw event
    locator.
    """
    coll = SectionCollector([plane], phase_map=phase_map,
                            loc_tol_scale=loc_tol_scale,
                            min_crossing_height=min_crossing_height)
    ps = coll._planes[0]
    # run the scan with the slab test disabled
    ps.plane = replace(plane, slab_halfwidth=math.inf)
    y0 = dense.eval(0.0)

    class _Sample(NamedTuple):
        t0: float
        y0: np.ndarray
        t1: float
        y1: np.ndarray
        dense: object

    coll.observe(_Sample(dense.t0, y0, dense.t1, dense.eval(1.0), dense))
    if not ps.points:
        return None
    return Crossing(ps.times[0], ps.points[0])


class FunctionSegment:
    """Dense-output stand-in evaluating an analytic state function.

    Lets synthetic flows given in closed form drive the same crossing
    machinery as integrated trajectories.
    """

    __slots__ = ("fn", "t0", "h")

    def __init__(self, fn: Callable, t0: float, t1: float):
        self.fn = fn
        self.t0 = t0
        self.h = t1 - t0

    @property
    def t1(self):
        return self.t0 + self.h

    def eval(self, sigma):
        return np.asarray(self.fn(self.t0 + float(sigma) * self.h),
                          dtype=float)

    def eval_many(self, sigmas):
        return np.array([self.eval(s) for s in np.asarray(sigmas)])


def function_trajectory(fn: Callable, t_end: float, step: float, t0=0.0):
    """Yield trajectory samples of an analytic flow, one per segment."""
    from .integrate import TrajectorySample

    t = float(t0)
    while t < t_end - 1e-12 * max(1.0, t_end):
        t1 = min(t + step, t_end)
        seg = FunctionSegment(fn, t, t1)
        yield TrajectorySample(t, seg.eval(0.0), t1, seg.eval(1.0), seg)
        t = t1


def collect_section(samples, plane: PlaneSpec, phase_map=None,
                    **collector_kwargs) -> SectionCloud:
    """Collect one plane's section from an iterable of samples."""
    coll = SectionCollector([plane], phase_map=phase_map,
                            **collector_kwargs)
    for sample in samples:
        if coll.observe(sample):
            break
    return coll.clouds()[0]


def collect_sections(system, y0, config, planes,
                     **collector_kwargs):
    """Integrate a trajectory and section it on several planes.

    Returns (clouds, trajectory summary). The collector stops the run
    early when every cloud is full or, if ``config.max_crossings`` is
    set, after that many accepted points in total.
    """
    from .integrate import integrate_trajectory

    coll = SectionCollector(planes, phase_map=system.phase_coords,
                            phase_map_many=system.phase_coords_many,
                            max_crossings=config.max_crossings,
                            **collector_kwargs)
    summary = integrate_trajectory(system, y0, config, observer=coll)
    return coll.clouds(), summary
