"""Angle wrapping and wrap-aware metrics.

Angles live on (-pi, pi]. Distances treat masked coordinates as circular
(shorter arc) and the rest as plain Euclidean, which is what every
consumer of section clouds in this package expects.
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import kernel

TWO_PI = 2.0 * math.pi


@kernel
def wrap_angle(a: float) -> float:
    """Map an angle to the half-open interval (-pi, pi]."""
    w = a - TWO_PI * math.floor((a + math.pi) / TWO_PI)
    if w <= -math.pi:
        w = math.pi
    return w


def wrap_coords(x, angular_mask):
    """Wrap the masked coordinates of a point (or array of points)."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    if out.ndim == 1:
        for i, ang in enumerate(angular_mask):
            if ang:
                out[i] = wrap_angle(out[i])
        return out
    for i, ang in enumerate(angular_mask):
        if ang:
            col = out[..., i]
            col -= TWO_PI * np.floor((col + math.pi) / TWO_PI)
            col[col <= -math.pi] = math.pi
    return out


def unwrap_near(x, ref, angular_mask):
    """Shift angular coordinates of x by multiples of 2*pi toward ref.

    Returns the representative of x whose masked coordinates lie within
    pi of the reference. Non-angular coordinates pass through.
    """
    out = np.array(x, dtype=float, copy=True)
    for i, ang in enumerate(angular_mask):
        if ang:
            out[i] -= TWO_PI * round((out[i] - ref[i]) / TWO_PI)
    return out


def wrapped_delta(x, y, angular_mask):
    """Componentwise difference x - y, shortest arc on angular coordinates."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    for i, ang in enumerate(angular_mask):
        if ang:
            d[..., i] -= TWO_PI * np.round(d[..., i] / TWO_PI)
    return d


def wrapped_distance(x, y, angular_mask):
    d = wrapped_delta(x, y, angular_mask)
    return float(np.sqrt(np.sum(d * d)))


def pairwise_sq_distances(block_a, block_b, angular_mask):
    """Squared wrap-aware distances between two blocks of points.

    block_a is (m, d), block_b is (n, d); the result is (m, n). Used
    blockwise by the classifier so memory stays bounded.
    """
    diff = block_a[:, None, :] - block_b[None, :, :]
    for i, ang in enumerate(angular_mask):
        if ang:
            diff[..., i] -= TWO_PI * np.round(diff[..., i] / TWO_PI)
    return np.einsum("ijk,ijk->ij", diff, diff)
