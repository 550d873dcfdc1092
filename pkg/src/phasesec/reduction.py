"""Rotational symmetry reduction of the planar chain.

With zero gravity the chain Lagrangian depends on segment directions
only through their differences, so the overall orientation is cyclic
and can be dropped. The reduced coordinates are the two relative
segment angles beta1 = alpha2 - alpha1 and beta2 = alpha3 - alpha2,
wrapped to (-pi, pi], together with their rates. A trajectory of the
full Cartesian dynamics projects to a curve in this 4-dimensional
space; sections are taken there.

The chain is never integrated in reduced coordinates. Integration
stays Cartesian, where the constraint treatment is exact, and samples
are reduced afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .angles import wrap_angle
from .errors import DegenerateSegment, ReductionInvalid
from .systems.pendulum import CartesianState, _reduced

__all__ = ["ReducedState", "segment_angles", "reduce_state", "embed", "reduce"]

_MIN_SEGMENT = 1e-12


@dataclass(frozen=True)
class ReducedState:
    """Relative segment angles (wrapped to (-pi, pi]) and their rates."""

    beta1: float
    beta2: float
    beta1_rate: float
    beta2_rate: float

    def __post_init__(self):
        object.__setattr__(self, "beta1", wrap_angle(float(self.beta1)))
        object.__setattr__(self, "beta2", wrap_angle(float(self.beta2)))
        object.__setattr__(self, "beta1_rate", float(self.beta1_rate))
        object.__setattr__(self, "beta2_rate", float(self.beta2_rate))

    def as_array(self):
        return np.array(
            [self.beta1, self.beta2, self.beta1_rate, self.beta2_rate])

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[0], x[1], x[2], x[3])


def _segments(params, state):
    e1 = params.eps1
    c2 = params.eps2
    c1 = e1 * (1.0 - c2)
    s1 = state.r1
    s2 = state.r2 - e1 * state.r1
    s3 = state.r3 - c1 * state.r1 - c2 * state.r2
    sd1 = state.v1
    sd2 = state.v2 - e1 * state.v1
    sd3 = state.v3 - c1 * state.v1 - c2 * state.v2
    return (s1, s2, s3), (sd1, sd2, sd3)


def segment_angles(params, state):
    """Absolute segment angles alpha_i and their rates.

    Angles come from atan2 of the segment vectors; rates from the
    perpendicular velocity component over the segment length. Assumes
    the state is on the constraint manifold.

    Raises
    ------
    DegenerateSegment
        If any segment is shorter than 1e-12.
    """
    segs, rates = _segments(params, state)
    alphas = np.empty(3)
    alpha_rates = np.empty(3)
    for i, (s, sd) in enumerate(zip(segs, rates)):
        q = float(s @ s)
        if q < _MIN_SEGMENT * _MIN_SEGMENT:
            raise DegenerateSegment(
                f"segment {i + 1} has near-zero length, angle undefined")
        alphas[i] = math.atan2(s[1], s[0])
        alpha_rates[i] = (s[0] * sd[1] - s[1] * sd[0]) / q
    return alphas, alpha_rates


def reduce_state(params, state):
    """Project a Cartesian state to the reduced relative-angle chart.

    Raises
    ------
    ReductionInvalid
        If gravity is nonzero; the symmetry the chart relies on is
        broken then.
    DegenerateSegment
        Propagated from `segment_angles`.
    """
    if params.gravity != 0.0:
        raise ReductionInvalid(
            "rotational reduction needs zero gravity, "
            f"got gravity={params.gravity}")
    alphas, rates = segment_angles(params, state)
    return ReducedState(alphas[1] - alphas[0], alphas[2] - alphas[1],
                        rates[1] - rates[0], rates[2] - rates[1])


# short alias, shadows the builtin only inside this namespace
reduce = reduce_state


def embed(params, reduced, base_angle=0.0, base_rate=0.0):
    """Inverse of `reduce_state`: rebuild a Cartesian state at t = 0.

    The reduced chart forgets the overall orientation and its rate;
    supply them explicitly (defaults: segment 1 along +x, not
    rotating). The result satisfies the length constraints exactly up
    to rounding.
    """
    l1, l2, l3 = params.lengths
    e1 = params.eps1
    c2 = params.eps2
    c1 = e1 * (1.0 - c2)

    a1 = float(base_angle)
    a2 = a1 + reduced.beta1
    a3 = a2 + reduced.beta2
    w1 = float(base_rate)
    w2 = w1 + reduced.beta1_rate
    w3 = w2 + reduced.beta2_rate

    u1 = np.array([math.cos(a1), math.sin(a1)])
    u2 = np.array([math.cos(a2), math.sin(a2)])
    u3 = np.array([math.cos(a3), math.sin(a3)])
    p1 = np.array([-u1[1], u1[0]])
    p2 = np.array([-u2[1], u2[0]])
    p3 = np.array([-u3[1], u3[0]])

    r1 = l1 * u1
    v1 = l1 * w1 * p1
    r2 = e1 * r1 + l2 * u2
    v2 = e1 * v1 + l2 * w2 * p2
    r3 = c1 * r1 + c2 * r2 + l3 * u3
    v3 = c1 * v1 + c2 * v2 + l3 * w3 * p3
    return CartesianState(0.0, r1, r2, r3, v1, v2, v3)


def reduced_coords_flat(params, y):
    """Fast path: reduced 4-vector straight from a flat state vector."""
    out = _reduced(params.kernel_vector(), np.asarray(y, dtype=float))
    if not np.all(np.isfinite(out)):
        raise DegenerateSegment("segment angle undefined, zero length")
    return out
