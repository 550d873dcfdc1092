"""Planar chain of three point masses with adjustable attachment points.

Mass i moves in the plane subject to one holonomic constraint per
segment. Segment 1 ties mass 1 to the origin at fixed length l1.
Segment 2 ties mass 2 to the point eps1 * r1, so eps1 = 1 hangs it off
mass 1 and eps1 = 0 pins it to the origin. Segment 3 ties mass 3 to
eps1 * r1 + eps2 * (r2 - eps1 * r1), interpolating in the same way
between the segment-2 anchor and mass 2. With eps1 = eps2 = 1 this is
the classic triple chain; eps1 = 0 splits off mass 1 entirely, which
makes the system integrable and serves as the reference column of
parameter sweeps.

Residuals are written as squared lengths, phi_i = |d_i|^2 - l_i^2, so
they are polynomial and their derivatives are exact. Dynamics follows
from Lagrange multipliers with Baumgarte stabilization: the multiplier
system enforces d2(phi)/dt2 = -2*gamma*d(phi)/dt - gamma^2*phi, which
damps constraint drift without changing the motion on the manifold.

Gravity points along -y; the default is zero gravity (free motion),
the only regime where the rotational symmetry reduction applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._jit import kernel
from ..errors import DegenerateSegment, SingularConstraintSystem
from .base import DynamicalSystem

__all__ = [
    "PendulumParams",
    "CartesianState",
    "PendulumSystem",
    "constraint_values",
    "constraint_rates",
    "constraint_jacobian",
    "pendulum_rhs",
    "pendulum_energy",
    "pendulum_angular_momentum",
]

# Relative determinant floor below which the multiplier system counts
# as singular (degenerate configuration, e.g. a zero-length segment).
_SINGULAR_RTOL = 1e-12

_MIN_SEGMENT_SQ = 1e-24


@dataclass(frozen=True)
class PendulumParams:
    """Segment lengths, masses, attachment fractions and gravity.

    Attachment fractions eps1, eps2 slide the anchor of the next segment
    between the previous anchor (0) and the previous mass (1).
    """

    lengths: tuple = (1.0, 1.0, 1.0)
    masses: tuple = (1.0, 1.0, 1.0)
    eps1: float = 1.0
    eps2: float = 1.0
    gravity: float = 0.0

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        masses = tuple(float(v) for v in self.masses)
        if len(lengths) != 3 or len(masses) != 3:
            raise ValueError("lengths and masses must each have 3 entries")
        if any(not v > 0.0 for v in lengths):
            raise ValueError(f"lengths must be positive, got {lengths}")
        if any(not v > 0.0 for v in masses):
            raise ValueError(f"masses must be positive, got {masses}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "eps1", float(self.eps1))
        object.__setattr__(self, "eps2", float(self.eps2))
        object.__setattr__(self, "gravity", float(self.gravity))
        if not 0.0 <= self.eps1 <= 1.0 or not 0.0 <= self.eps2 <= 1.0:
            raise ValueError(
                f"attachment fractions must lie in [0, 1], got "
                f"({self.eps1}, {self.eps2})")
        if self.gravity < 0.0:
            raise ValueError("gravity must be nonnegative")

    def kernel_vector(self):
        """Parameters packed for the compiled kernels."""
        return np.array([*self.lengths, *self.masses,
                         self.eps1, self.eps2, self.gravity])


@dataclass(frozen=True, eq=False)
class CartesianState:
    """Positions and velocities of the three masses at time t."""

    t: float
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        for name in ("r1", "r2", "r3", "v1", "v2", "v3"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if vec.shape != (2,):
                raise ValueError(f"{name} must be a 2-vector, got {vec.shape}")
            object.__setattr__(self, name, vec)

    def as_vector(self):
        """Flat layout: positions of masses 1..3, then velocities."""
        return np.concatenate(
            [self.r1, self.r2, self.r3, self.v1, self.v2, self.v3])

    @classmethod
    def from_vector(cls, t, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (12,):
            raise ValueError(f"state vector must have length 12, got {y.shape}")
        return cls(t, y[0:2], y[2:4], y[4:6], y[6:8], y[8:10], y[10:12])


# ---------------------------------------------------------------------------
# compiled kernels, flat layout y = (x1, y1, x2, y2, x3, y3, u1..v3)

@kernel
def _residuals(pv, y):
    e1 = pv[6]
    c1 = e1 * (1.0 - pv[7])
    c2 = pv[7]
    d1x = y[0]
    d1y = y[1]
    d2x = y[2] - e1 * y[0]
    d2y = y[3] - e1 * y[1]
    d3x = y[4] - c1 * y[0] - c2 * y[2]
    d3y = y[5] - c1 * y[1] - c2 * y[3]
    out = np.empty(3)
    out[0] = d1x * d1x + d1y * d1y - pv[0] * pv[0]
    out[1] = d2x * d2x + d2y * d2y - pv[1] * pv[1]
    out[2] = d3x * d3x + d3y * d3y - pv[2] * pv[2]
    return out


@kernel
def _rates(pv, y):
    e1 = pv[6]
    c1 = e1 * (1.0 - pv[7])
    c2 = pv[7]
    d1x = y[0]
    d1y = y[1]
    d2x = y[2] - e1 * y[0]
    d2y = y[3] - e1 * y[1]
    d3x = y[4] - c1 * y[0] - c2 * y[2]
    d3y = y[5] - c1 * y[1] - c2 * y[3]
    w1x = y[6]
    w1y = y[7]
    w2x = y[8] - e1 * y[6]
    w2y = y[9] - e1 * y[7]
    w3x = y[10] - c1 * y[6] - c2 * y[8]
    w3y = y[11] - c1 * y[7] - c2 * y[9]
    out = np.empty(3)
    out[0] = 2.0 * (d1x * w1x + d1y * w1y)
    out[1] = 2.0 * (d2x * w2x + d2y * w2y)
    out[2] = 2.0 * (d3x * w3x + d3y * w3y)
    return out


@kernel
def _jacobian(pv, y):
    e1 = pv[6]
    c1 = e1 * (1.0 - pv[7])
    c2 = pv[7]
    d1x = y[0]
    d1y = y[1]
    d2x = y[2] - e1 * y[0]
    d2y = y[3] - e1 * y[1]
    d3x = y[4] - c1 * y[0] - c2 * y[2]
    d3y = y[5] - c1 * y[1] - c2 * y[3]
    out = np.zeros((3, 6))
    out[0, 0] = 2.0 * d1x
    out[0, 1] = 2.0 * d1y
    out[1, 0] = -2.0 * e1 * d2x
    out[1, 1] = -2.0 * e1 * d2y
    out[1, 2] = 2.0 * d2x
    out[1, 3] = 2.0 * d2y
    out[2, 0] = -2.0 * c1 * d3x
    out[2, 1] = -2.0 * c1 * d3y
    out[2, 2] = -2.0 * c2 * d3x
    out[2, 3] = -2.0 * c2 * d3y
    out[2, 4] = 2.0 * d3x
    out[2, 5] = 2.0 * d3y
    return out


@kernel
def _accel(pv, gamma, y):
    """Accelerations and multipliers, NaN-filled when the solve is singular.

    Returns a 9-vector: a1x, a1y, a2x, a2y, a3x, a3y, lam1, lam2, lam3.
    """
    m1 = pv[3]
    m2 = pv[4]
    m3 = pv[5]
    e1 = pv[6]
    c1 = e1 * (1.0 - pv[7])
    c2 = pv[7]
    g = pv[8]

    d1x = y[0]
    d1y = y[1]
    d2x = y[2] - e1 * y[0]
    d2y = y[3] - e1 * y[1]
    d3x = y[4] - c1 * y[0] - c2 * y[2]
    d3y = y[5] - c1 * y[1] - c2 * y[3]
    w1x = y[6]
    w1y = y[7]
    w2x = y[8] - e1 * y[6]
    w2y = y[9] - e1 * y[7]
    w3x = y[10] - c1 * y[6] - c2 * y[8]
    w3y = y[11] - c1 * y[7] - c2 * y[9]

    q1 = d1x * d1x + d1y * d1y
    q2 = d2x * d2x + d2y * d2y
    q3 = d3x * d3x + d3y * d3y
    p12 = d1x * d2x + d1y * d2y
    p13 = d1x * d3x + d1y * d3y
    p23 = d2x * d3x + d2y * d3y

    a11 = 4.0 * q1 / m1
    a12 = -4.0 * e1 * p12 / m1
    a13 = -4.0 * c1 * p13 / m1
    a22 = 4.0 * (e1 * e1 / m1 + 1.0 / m2) * q2
    a23 = 4.0 * (e1 * c1 / m1 - c2 / m2) * p23
    a33 = 4.0 * (c1 * c1 / m1 + c2 * c2 / m2 + 1.0 / m3) * q3

    f1 = q1 - pv[0] * pv[0]
    f2 = q2 - pv[1] * pv[1]
    f3 = q3 - pv[2] * pv[2]
    df1 = 2.0 * (d1x * w1x + d1y * w1y)
    df2 = 2.0 * (d2x * w2x + d2y * w2y)
    df3 = 2.0 * (d3x * w3x + d3y * w3y)

    # d2(phi)/dt2 target from Baumgarte feedback, minus the velocity
    # curvature term and the applied-force contribution.
    b1 = (-2.0 * gamma * df1 - gamma * gamma * f1
          - 2.0 * (w1x * w1x + w1y * w1y) + 2.0 * g * d1y)
    b2 = (-2.0 * gamma * df2 - gamma * gamma * f2
          - 2.0 * (w2x * w2x + w2y * w2y) + 2.0 * g * (1.0 - e1) * d2y)
    b3 = (-2.0 * gamma * df3 - gamma * gamma * f3
          - 2.0 * (w3x * w3x + w3y * w3y)
          + 2.0 * g * (1.0 - c1 - c2) * d3y)

    i11 = a22 * a33 - a23 * a23
    i12 = a13 * a23 - a12 * a33
    i13 = a12 * a23 - a13 * a22
    i22 = a11 * a33 - a13 * a13
    i23 = a12 * a13 - a11 * a23
    i33 = a11 * a22 - a12 * a12
    det = a11 * i11 + a12 * i12 + a13 * i13

    norm = abs(a11)
    for v in (abs(a12), abs(a13), abs(a22), abs(a23), abs(a33)):
        if v > norm:
            norm = v
    out = np.empty(9)
    if abs(det) <= _SINGULAR_RTOL * norm * norm * norm or norm == 0.0:
        out[:] = np.nan
        return out

    lam1 = (i11 * b1 + i12 * b2 + i13 * b3) / det
    lam2 = (i12 * b1 + i22 * b2 + i23 * b3) / det
    lam3 = (i13 * b1 + i23 * b2 + i33 * b3) / det

    out[0] = (2.0 * lam1 * d1x - 2.0 * e1 * lam2 * d2x
              - 2.0 * c1 * lam3 * d3x) / m1
    out[1] = (2.0 * lam1 * d1y - 2.0 * e1 * lam2 * d2y
              - 2.0 * c1 * lam3 * d3y) / m1 - g
    out[2] = (2.0 * lam2 * d2x - 2.0 * c2 * lam3 * d3x) / m2
    out[3] = (2.0 * lam2 * d2y - 2.0 * c2 * lam3 * d3y) / m2 - g
    out[4] = 2.0 * lam3 * d3x / m3
    out[5] = 2.0 * lam3 * d3y / m3 - g
    out[6] = lam1
    out[7] = lam2
    out[8] = lam3
    return out


@kernel
def _rhs(pv, gamma, t, y):
    acc = _accel(pv, gamma, y)
    out = np.empty(12)
    out[0:6] = y[6:12]
    out[6:12] = acc[0:6]
    return out


@kernel
def _project(pv, y, tol, max_iter):
    """Gauss-Newton pull-back onto the constraint manifold.

    Positions first, then one linear projection of the velocities onto
    the tangent space. Returns (state, status) with status 0 on success,
    1 when the iteration fails to converge, 2 on a singular normal
    system.
    """
    out = y.copy()
    e1 = pv[6]
    c1 = e1 * (1.0 - pv[7])
    c2 = pv[7]
    status = 1
    for _ in range(max_iter):
        f = _residuals(pv, out)
        worst = max(abs(f[0]), abs(f[1]), abs(f[2]))
        if worst <= tol:
            status = 0
            break
        d1x = out[0]
        d1y = out[1]
        d2x = out[2] - e1 * out[0]
        d2y = out[3] - e1 * out[1]
        d3x = out[4] - c1 * out[0] - c2 * out[2]
        d3y = out[5] - c1 * out[1] - c2 * out[3]
        q1 = d1x * d1x + d1y * d1y
        q2 = d2x * d2x + d2y * d2y
        q3 = d3x * d3x + d3y * d3y
        p12 = d1x * d2x + d1y * d2y
        p13 = d1x * d3x + d1y * d3y
        p23 = d2x * d3x + d2y * d3y
        b11 = 4.0 * q1
        b12 = -4.0 * e1 * p12
        b13 = -4.0 * c1 * p13
        b22 = 4.0 * (1.0 + e1 * e1) * q2
        b23 = 4.0 * (e1 * c1 - c2) * p23
        b33 = 4.0 * (1.0 + c1 * c1 + c2 * c2) * q3
        i11 = b22 * b33 - b23 * b23
        i12 = b13 * b23 - b12 * b33
        i13 = b12 * b23 - b13 * b22
        i22 = b11 * b33 - b13 * b13
        i23 = b12 * b13 - b11 * b23
        i33 = b11 * b22 - b12 * b12
        det = b11 * i11 + b12 * i12 + b13 * i13
        norm = abs(b11)
        for v in (abs(b12), abs(b13), abs(b22), abs(b23), abs(b33)):
            if v > norm:
                norm = v
        if abs(det) <= _SINGULAR_RTOL * norm * norm * norm or norm == 0.0:
            return out, 2
        mu1 = (i11 * f[0] + i12 * f[1] + i13 * f[2]) / det
        mu2 = (i12 * f[0] + i22 * f[1] + i23 * f[2]) / det
        mu3 = (i13 * f[0] + i23 * f[1] + i33 * f[2]) / det
        # delta = J^T mu, rows of J as in _jacobian
        out[0] -= 2.0 * (mu1 * d1x - e1 * mu2 * d2x - c1 * mu3 * d3x)
        out[1] -= 2.0 * (mu1 * d1y - e1 * mu2 * d2y - c1 * mu3 * d3y)
        out[2] -= 2.0 * (mu2 * d2x - c2 * mu3 * d3x)
        out[3] -= 2.0 * (mu2 * d2y - c2 * mu3 * d3y)
        out[4] -= 2.0 * mu3 * d3x
        out[5] -= 2.0 * mu3 * d3y
    if status != 0:
        f = _residuals(pv, out)
        if max(abs(f[0]), abs(f[1]), abs(f[2])) <= tol:
            status = 0
        else:
            return out, status

    # velocity part: remove the normal component, v <- v - J^T (JJ^T)^-1 J v
    d1x = out[0]
    d1y = out[1]
    d2x = out[2] - e1 * out[0]
    d2y = out[3] - e1 * out[1]
    d3x = out[4] - c1 * out[0] - c2 * out[2]
    d3y = out[5] - c1 * out[1] - c2 * out[3]
    q1 = d1x * d1x + d1y * d1y
    q2 = d2x * d2x + d2y * d2y
    q3 = d3x * d3x + d3y * d3y
    p12 = d1x * d2x + d1y * d2y
    p13 = d1x * d3x + d1y * d3y
    p23 = d2x * d3x + d2y * d3y
    b11 = 4.0 * q1
    b12 = -4.0 * e1 * p12
    b13 = -4.0 * c1 * p13
    b22 = 4.0 * (1.0 + e1 * e1) * q2
    b23 = 4.0 * (e1 * c1 - c2) * p23
    b33 = 4.0 * (1.0 + c1 * c1 + c2 * c2) * q3
    i11 = b22 * b33 - b23 * b23
    i12 = b13 * b23 - b12 * b33
    i13 = b12 * b23 - b13 * b22
    i22 = b11 * b33 - b13 * b13
    i23 = b12 * b13 - b11 * b23
    i33 = b11 * b22 - b12 * b12
    det = b11 * i11 + b12 * i12 + b13 * i13
    norm = abs(b11)
    for v in (abs(b12), abs(b13), abs(b22), abs(b23), abs(b33)):
        if v > norm:
            norm = v
    if abs(det) <= _SINGULAR_RTOL * norm * norm * norm or norm == 0.0:
        return out, 2
    g1 = _rates(pv, out)
    mu1 = (i11 * g1[0] + i12 * g1[1] + i13 * g1[2]) / det
    mu2 = (i12 * g1[0] + i22 * g1[1] + i23 * g1[2]) / det
    mu3 = (i13 * g1[0] + i23 * g1[1] + i33 * g1[2]) / det
    out[6] -= 2.0 * (mu1 * d1x - e1 * mu2 * d2x - c1 * mu3 * d3x)
    out[7] -= 2.0 * (mu1 * d1y - e1 * mu2 * d2y - c1 * mu3 * d3y)
    out[8] -= 2.0 * (mu2 * d2x - c2 * mu3 * d3x)
    out[9] -= 2.0 * (mu2 * d2y - c2 * mu3 * d3y)
    out[10] -= 2.0 * mu3 * d3x
    out[11] -= 2.0 * mu3 * d3y
    return out, 0


@kernel
def _poststep(pv, gamma, y, tol, e_target, l_target, do_correct):
    """Project, optionally correct invariants, then evaluate the rhs.

    One compiled dispatch for the whole per-step commit. Returns
    (state, status, rhs); status 0 on success, 1 and 2 as in
    `_project`, 3 when the rhs is not finite at the final state.
    """
    out, status = _project(pv, y, tol, 20)
    f = np.empty(12)
    if status != 0:
        return out, status, f
    if do_correct:
        out = _correct(pv, out, e_target, l_target)
    f = _rhs(pv, gamma, 0.0, out)
    s = 0.0
    for k in range(12):
        s += f[k]
    if not math.isfinite(s):
        status = 3
    return out, status, f


@kernel
def _metrics(pv, y):
    """Energy, angular momentum about the origin, worst residual."""
    m1 = pv[3]
    m2 = pv[4]
    m3 = pv[5]
    g = pv[8]
    kin = 0.5 * (m1 * (y[6] * y[6] + y[7] * y[7])
                 + m2 * (y[8] * y[8] + y[9] * y[9])
                 + m3 * (y[10] * y[10] + y[11] * y[11]))
    pot = g * (m1 * y[1] + m2 * y[3] + m3 * y[5])
    ang = (m1 * (y[0] * y[7] - y[1] * y[6])
           + m2 * (y[2] * y[9] - y[3] * y[8])
           + m3 * (y[4] * y[11] - y[5] * y[10]))
    f = _residuals(pv, y)
    res = max(abs(f[0]), abs(f[1]), abs(f[2]))
    return kin + pot, ang, res


@kernel
def _correct(pv, y, e_target, l_target):
    """Nudge velocities back onto the target energy and momentum levels.

    The correction lives in the span of the two conserved-quantity
    gradients projected onto the tangent space of the rod constraints,
    so constraint rates stay zero. When the projected gradients align
    (rigid rotation makes them exactly parallel) only the energy is
    corrected; combined with a singular normal system the state is
    returned unchanged. Velocity-only: at most the two quadratic
    equations need three Newton passes to reach roundoff.
    """
    m1 = pv[3]
    m2 = pv[4]
    m3 = pv[5]
    e1 = pv[6]
    c1 = e1 * (1.0 - pv[7])
    c2 = pv[7]
    out = y.copy()

    d1x = out[0]
    d1y = out[1]
    d2x = out[2] - e1 * out[0]
    d2y = out[3] - e1 * out[1]
    d3x = out[4] - c1 * out[0] - c2 * out[2]
    d3y = out[5] - c1 * out[1] - c2 * out[3]
    q1 = d1x * d1x + d1y * d1y
    q2 = d2x * d2x + d2y * d2y
    q3 = d3x * d3x + d3y * d3y
    p12 = d1x * d2x + d1y * d2y
    p13 = d1x * d3x + d1y * d3y
    p23 = d2x * d3x + d2y * d3y
    b11 = 4.0 * q1
    b12 = -4.0 * e1 * p12
    b13 = -4.0 * c1 * p13
    b22 = 4.0 * (1.0 + e1 * e1) * q2
    b23 = 4.0 * (e1 * c1 - c2) * p23
    b33 = 4.0 * (1.0 + c1 * c1 + c2 * c2) * q3
    i11 = b22 * b33 - b23 * b23
    i12 = b13 * b23 - b12 * b33
    i13 = b12 * b23 - b13 * b22
    i22 = b11 * b33 - b13 * b13
    i23 = b12 * b13 - b11 * b23
    i33 = b11 * b22 - b12 * b12
    det = b11 * i11 + b12 * i12 + b13 * i13
    norm = abs(b11)
    for v in (abs(b12), abs(b13), abs(b22), abs(b23), abs(b33)):
        if v > norm:
            norm = v
    if abs(det) <= _SINGULAR_RTOL * norm * norm * norm or norm == 0.0:
        return out

    ge = np.empty(6)
    gl = np.empty(6)
    gt = np.empty(6)
    for _ in range(3):
        em = _metrics(pv, out)
        re = em[0] - e_target
        rl = em[1] - l_target
        se = 1e-15 * (1.0 + abs(e_target))
        sl = 1e-15 * (1.0 + abs(l_target))
        if abs(re) <= se and abs(rl) <= sl:
            break
        ge[0] = m1 * out[6]
        ge[1] = m1 * out[7]
        ge[2] = m2 * out[8]
        ge[3] = m2 * out[9]
        ge[4] = m3 * out[10]
        ge[5] = m3 * out[11]
        gl[0] = -m1 * out[1]
        gl[1] = m1 * out[0]
        gl[2] = -m2 * out[3]
        gl[3] = m2 * out[2]
        gl[4] = -m3 * out[5]
        gl[5] = m3 * out[4]
        for which in range(2):
            g = ge if which == 0 else gl
            r1 = 2.0 * (d1x * g[0] + d1y * g[1])
            r2 = 2.0 * (-e1 * (d2x * g[0] + d2y * g[1])
                        + d2x * g[2] + d2y * g[3])
            r3 = 2.0 * (-c1 * (d3x * g[0] + d3y * g[1])
                        - c2 * (d3x * g[2] + d3y * g[3])
                        + d3x * g[4] + d3y * g[5])
            mu1 = (i11 * r1 + i12 * r2 + i13 * r3) / det
            mu2 = (i12 * r1 + i22 * r2 + i23 * r3) / det
            mu3 = (i13 * r1 + i23 * r2 + i33 * r3) / det
            gt[0] = g[0] - 2.0 * (mu1 * d1x - e1 * mu2 * d2x
                                  - c1 * mu3 * d3x)
            gt[1] = g[1] - 2.0 * (mu1 * d1y - e1 * mu2 * d2y
                                  - c1 * mu3 * d3y)
            gt[2] = g[2] - 2.0 * (mu2 * d2x - c2 * mu3 * d3x)
            gt[3] = g[3] - 2.0 * (mu2 * d2y - c2 * mu3 * d3y)
            gt[4] = g[4] - 2.0 * mu3 * d3x
            gt[5] = g[5] - 2.0 * mu3 * d3y
            for k in range(6):
                g[k] = gt[k]
        a11 = 0.0
        a12 = 0.0
        a22 = 0.0
        for k in range(6):
            a11 += ge[k] * ge[k]
            a12 += ge[k] * gl[k]
            a22 += gl[k] * gl[k]
        gram_det = a11 * a22 - a12 * a12
        if gram_det > 1e-10 * a11 * a22 and gram_det > 0.0:
            ca = (-re * a22 + rl * a12) / gram_det
            cb = (-rl * a11 + re * a12) / gram_det
        elif a11 > 1e-30:
            ca = -re / a11
            cb = 0.0
        else:
            break
        for k in range(6):
            out[6 + k] += ca * ge[k] + cb * gl[k]
    return out


@kernel
def _reduced(pv, y):
    """Relative segment angles and their rates, NaN on degenerate segments."""
    e1 = pv[6]
    c1 = e1 * (1.0 - pv[7])
    c2 = pv[7]
    d1x = y[0]
    d1y = y[1]
    d2x = y[2] - e1 * y[0]
    d2y = y[3] - e1 * y[1]
    d3x = y[4] - c1 * y[0] - c2 * y[2]
    d3y = y[5] - c1 * y[1] - c2 * y[3]
    w1x = y[6]
    w1y = y[7]
    w2x = y[8] - e1 * y[6]
    w2y = y[9] - e1 * y[7]
    w3x = y[10] - c1 * y[6] - c2 * y[8]
    w3y = y[11] - c1 * y[7] - c2 * y[9]
    q1 = d1x * d1x + d1y * d1y
    q2 = d2x * d2x + d2y * d2y
    q3 = d3x * d3x + d3y * d3y
    out = np.empty(4)
    if q1 < _MIN_SEGMENT_SQ or q2 < _MIN_SEGMENT_SQ or q3 < _MIN_SEGMENT_SQ:
        out[:] = np.nan
        return out
    al1 = math.atan2(d1y, d1x)
    al2 = math.atan2(d2y, d2x)
    al3 = math.atan2(d3y, d3x)
    r1 = (d1x * w1y - d1y * w1x) / q1
    r2 = (d2x * w2y - d2y * w2x) / q2
    r3 = (d3x * w3y - d3y * w3x) / q3
    b1 = al2 - al1
    b1 -= 2.0 * math.pi * math.floor((b1 + math.pi) / (2.0 * math.pi))
    if b1 <= -math.pi:
        b1 = math.pi
    b2 = al3 - al2
    b2 -= 2.0 * math.pi * math.floor((b2 + math.pi) / (2.0 * math.pi))
    if b2 <= -math.pi:
        b2 = math.pi
    out[0] = b1
    out[1] = b2
    out[2] = r2 - r1
    out[3] = r3 - r2
    return out


@kernel
def _reduced_many(pv, ys):
    """Row-by-row `_reduced`, one dispatch for a whole batch."""
    n = ys.shape[0]
    out = np.empty((n, 4))
    for r in range(n):
        out[r] = _reduced(pv, ys[r])
    return out


# ---------------------------------------------------------------------------
# public operations

def constraint_values(params, state):
    """Residuals of the three length constraints, zero on the manifold."""
    return _residuals(params.kernel_vector(), state.as_vector())


def constraint_rates(params, state):
    """Time derivatives of the residuals along the current velocities."""
    return _rates(params.kernel_vector(), state.as_vector())


def constraint_jacobian(params, state):
    """(3, 6) Jacobian of the residuals with respect to the positions."""
    return _jacobian(params.kernel_vector(), state.as_vector())


def pendulum_rhs(params, state, gamma=10.0):
    """Accelerations of the three masses and constraint multipliers.

    Solves the 3x3 multiplier system J M^-1 J^T lam = b produced by the
    Baumgarte-stabilized acceleration condition, then recovers
    a_i = F_i / m_i + (J^T lam)_i / m_i.

    Returns
    -------
    accel : ndarray, shape (3, 2)
    multipliers : ndarray, shape (3,)

    Raises
    ------
    SingularConstraintSystem
        If the multiplier matrix is singular beyond tolerance.
    """
    acc = _accel(params.kernel_vector(), float(gamma), state.as_vector())
    if not np.all(np.isfinite(acc)):
        raise SingularConstraintSystem(
            "multiplier system is singular at this configuration")
    return acc[0:6].reshape(3, 2), acc[6:9].copy()


def pendulum_energy(params, state):
    """Kinetic plus gravitational potential energy."""
    e, _, _ = _metrics(params.kernel_vector(), state.as_vector())
    return float(e)


def pendulum_angular_momentum(params, state):
    """Total angular momentum about the origin."""
    _, ang, _ = _metrics(params.kernel_vector(), state.as_vector())
    return float(ang)


class PendulumSystem(DynamicalSystem):
    """Integration adapter for the chain, flat 12-vector state."""

    dim = 12
    angular_mask = (True, True, False, False)
    coord_names = ("beta1", "beta2", "beta1_rate", "beta2_rate")

    def __init__(self, params, gamma=10.0):
        self.params = params
        self.gamma = float(gamma)
        self.kernel_params = params.kernel_vector()
        self.rhs_kernel = _rhs

    def rhs(self, t, y):
        out = _rhs(self.kernel_params, self.gamma, t, np.asarray(y, float))
        if not np.all(np.isfinite(out)):
            raise SingularConstraintSystem(
                f"multiplier system singular at t={t}")
        return out

    def project(self, y, tol):
        out, status = _project(np.asarray(self.kernel_params, float),
                               np.asarray(y, float), float(tol), 20)
        if status == 2:
            raise SingularConstraintSystem(
                "projection normal system is singular")
        if status != 0:
            from ..errors import ProjectionDiverged
            raise ProjectionDiverged(
                "constraint projection did not converge in 20 iterations")
        return out

    def invariants(self, y):
        e, ang, _ = _metrics(self.kernel_params, y)
        return {"energy": float(e), "angular_momentum": float(ang)}

    def correct_invariants(self, y, targets, tol):
        return _correct(self.kernel_params, np.asarray(y, float),
                        targets["energy"], targets["angular_momentum"])

    def poststep(self, t, y, tol, targets):
        if targets is None:
            out, status, f = _poststep(self.kernel_params, self.gamma, y,
                                       float(tol), 0.0, 0.0, False)
        else:
            out, status, f = _poststep(self.kernel_params, self.gamma, y,
                                       float(tol), targets["energy"],
                                       targets["angular_momentum"], True)
        if status == 0:
            return out, f
        if status == 2:
            raise SingularConstraintSystem(
                "projection normal system is singular")
        if status == 3:
            raise SingularConstraintSystem(
                f"multiplier system singular at t={t}")
        from ..errors import ProjectionDiverged
        raise ProjectionDiverged(
            "constraint projection did not converge in 20 iterations")

    def monitor(self, y):
        e, ang, res = _metrics(self.kernel_params, y)
        return ({"energy": float(e), "angular_momentum": float(ang)},
                float(res))

    def constraint_residual(self, y):
        _, _, res = _metrics(self.kernel_params, y)
        return float(res)

    def phase_coords(self, y):
        out = _reduced(self.kernel_params, np.asarray(y, float))
        # NaN/inf anywhere poisons the sum; cheaper than np.isfinite
        if not math.isfinite(out[0] + out[1] + out[2] + out[3]):
            raise DegenerateSegment("segment angle undefined, zero length")
        return out

    def phase_coords_many(self, ys):
        out = _reduced_many(self.kernel_params, np.asarray(ys, float))
        if not math.isfinite(float(out.sum())):
            raise DegenerateSegment("segment angle undefined, zero length")
        return out

    def raise_for_state(self, t, y):
        self.rhs(t, y)
        from ..errors import StepSizeUnderflow
        raise StepSizeUnderflow(f"step control failed near t={t}")
