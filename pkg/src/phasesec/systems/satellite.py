"""Attitude dynamics of an axially symmetric satellite on a circular orbit.

The spin angle about the symmetry axis is cyclic, so its momentum is a
parameter (p_phi = alpha * beta) and the remaining motion has two
degrees of freedom in (psi, theta, p_psi, p_theta). Two charts appear
below:

* `satellite_hamiltonian` / `satellite_rhs` implement the reduced,
  zero-spin (beta = 0) chart, with the polar axis of the angle
  convention along the orbit normal:

      H = p_psi^2 / (2 sin^2 theta) + p_theta^2 / 2 - p_psi
          + (3/2) (alpha - 1) sin^2 psi sin^2 theta

  This is the model the rest of the package integrates and sections.

* `satellite_full_hamiltonian` evaluates the same physics in the
  orbital-frame chart for arbitrary (alpha, beta). The two charts are
  related by a rotation of the Euler axis convention, so their values
  at equal coordinate tuples differ; the full form is provided for
  reference and cross-checks, not for integration.

Both charts are singular where sin(theta) vanishes; operations raise
CoordinateSingularity inside a guard band instead of returning junk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._jit import kernel
from ..errors import CoordinateSingularity
from .base import DynamicalSystem

__all__ = [
    "SatelliteParams",
    "SatelliteState",
    "SatelliteSystem",
    "satellite_hamiltonian",
    "satellite_full_hamiltonian",
    "satellite_rhs",
    "THETA_MIN",
]

# half-width of the guard band around sin(theta) = 0
THETA_MIN = 1e-8


@dataclass(frozen=True)
class SatelliteParams:
    """Inertia ratio alpha and spin ratio beta.

    alpha is the ratio of the transverse to the axial moment of inertia
    and must be positive. The conserved spin momentum is alpha * beta.
    """

    alpha: float = 4.0 / 3.0
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def p_phi(self):
        return self.alpha * self.beta

    def kernel_vector(self):
        return np.array([self.alpha, self.beta])


@dataclass(frozen=True)
class SatelliteState:
    psi: float
    theta: float
    p_psi: float
    p_theta: float

    def __post_init__(self):
        for name in ("psi", "theta", "p_psi", "p_theta"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def as_vector(self):
        return np.array([self.psi, self.theta, self.p_psi, self.p_theta])

    @classmethod
    def from_vector(cls, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (4,):
            raise ValueError(f"state vector must have length 4, got {y.shape}")
        return cls(y[0], y[1], y[2], y[3])


@kernel
def _hamiltonian(pv, y):
    s = math.sin(y[1])
    if abs(s) < THETA_MIN:
        return np.nan
    k = 1.5 * (pv[0] - 1.0)
    sp = math.sin(y[0])
    return (y[2] * y[2] / (2.0 * s * s) + y[3] * y[3] / 2.0
            - y[2] + k * sp * sp * s * s)


@kernel
def _rhs(pv, gamma, t, y):
    out = np.empty(4)
    s = math.sin(y[1])
    if abs(s) < THETA_MIN:
        out[:] = np.nan
        return out
    k = 1.5 * (pv[0] - 1.0)
    c = math.cos(y[1])
    sp = math.sin(y[0])
    s2 = s * s
    out[0] = y[2] / s2 - 1.0
    out[1] = y[3]
    out[2] = -k * math.sin(2.0 * y[0]) * s2
    out[3] = y[2] * y[2] * c / (s2 * s) - k * sp * sp * math.sin(2.0 * y[1])
    return out


@kernel
def _correct_energy(pv, y, h_target):
    """Newton nudge along the energy gradient back to the target level.

    The gradient comes from the symplectic structure of the right-hand
    side, so no separate derivative code is needed. Leaves the state
    unchanged when the gradient vanishes or the chart is singular.
    """
    out = y.copy()
    for _ in range(3):
        h = _hamiltonian(pv, out)
        if not math.isfinite(h):
            return y.copy()
        r = h - h_target
        if abs(r) <= 1e-16 * (1.0 + abs(h_target)):
            break
        f = _rhs(pv, 0.0, 0.0, out)
        g0 = -f[2]
        g1 = -f[3]
        g2 = f[0]
        g3 = f[1]
        n2 = g0 * g0 + g1 * g1 + g2 * g2 + g3 * g3
        if n2 < 1e-24:
            break
        s = r / n2
        out[0] -= s * g0
        out[1] -= s * g1
        out[2] -= s * g2
        out[3] -= s * g3
    return out


@kernel
def _poststep(pv, y, h_target, do_correct):
    """Energy correction plus the rhs in one compiled dispatch.

    Returns (state, status, rhs) with status 0 on success, 3 when the
    rhs is not finite (chart singularity). There is no constraint
    manifold, so no projection stage.
    """
    out = _correct_energy(pv, y, h_target) if do_correct else y.copy()
    f = _rhs(pv, 0.0, 0.0, out)
    status = 0
    if not math.isfinite(f[0] + f[1] + f[2] + f[3]):
        status = 3
    return out, status, f


def _require_regular(state):
    if abs(math.sin(state.theta)) < THETA_MIN:
        raise CoordinateSingularity(
            f"sin(theta) ~ 0 at theta={state.theta}, chart breaks down")


def satellite_hamiltonian(params, state):
    """Reduced-chart energy, the quantity conserved by `satellite_rhs`.

    Defined for zero spin ratio only; the chart does not exist
    otherwise.
    """
    if params.beta != 0.0:
        raise ValueError(
            "the reduced chart requires beta = 0; "
            "satellite_full_hamiltonian handles nonzero spin")
    _require_regular(state)
    return float(_hamiltonian(params.kernel_vector(), state.as_vector()))


def satellite_full_hamiltonian(params, state):
    """Orbital-frame energy for arbitrary (alpha, beta), p_phi = alpha*beta.

    Reference chart only. Values are not comparable point-for-point
    with `satellite_hamiltonian`, which uses a rotated axis convention.
    """
    _require_regular(state)
    s = math.sin(state.theta)
    c = math.cos(state.theta)
    ab = params.p_phi
    return float(
        state.p_psi ** 2 / (2.0 * s * s)
        + state.p_theta ** 2 / 2.0
        - state.p_psi * (c / s) * math.cos(state.psi)
        - ab * state.p_psi * c / (s * s)
        - state.p_theta * math.sin(state.psi)
        + ab * math.cos(state.psi) / s
        + ab * ab / (2.0 * s * s)
        + 1.5 * (params.alpha - 1.0) * c * c)


def satellite_rhs(params, state):
    """Hamilton equations of the reduced chart, as d/dt of the 4-vector."""
    if params.beta != 0.0:
        raise ValueError(
            "the reduced chart requires beta = 0; "
            "satellite_full_hamiltonian handles nonzero spin")
    _require_regular(state)
    return _rhs(params.kernel_vector(), 0.0, 0.0, state.as_vector())


class SatelliteSystem(DynamicalSystem):
    """Integration adapter, flat state (psi, theta, p_psi, p_theta)."""

    dim = 4
    angular_mask = (True, False, False, False)
    coord_names = ("psi", "theta", "p_psi", "p_theta")

    def __init__(self, params):
        if params.beta != 0.0:
            raise ValueError("only the beta = 0 reduction is integrable here")
        self.params = params
        self.kernel_params = params.kernel_vector()
        self.gamma = 0.0
        self.rhs_kernel = _rhs

    def rhs(self, t, y):
        out = _rhs(self.kernel_params, 0.0, t, np.asarray(y, float))
        if not np.all(np.isfinite(out)):
            raise CoordinateSingularity(
                f"sin(theta) ~ 0 at t={t}, chart breaks down")
        return out

    def prepare(self, y, tol):
        y = np.asarray(y, dtype=float)
        if abs(math.sin(y[1])) < THETA_MIN:
            raise CoordinateSingularity(
                "initial state sits on the sin(theta) = 0 singularity")
        return y

    def invariants(self, y):
        h = _hamiltonian(self.kernel_params, y)
        return {"energy": float(h)}

    def correct_invariants(self, y, targets, tol):
        return _correct_energy(self.kernel_params,
                               np.asarray(y, dtype=float),
                               targets["energy"])

    def poststep(self, t, y, tol, targets):
        if targets is None:
            out, status, f = _poststep(self.kernel_params, y, 0.0, False)
        else:
            out, status, f = _poststep(self.kernel_params, y,
                                       targets["energy"], True)
        if status != 0:
            raise CoordinateSingularity(
                f"sin(theta) ~ 0 at t={t}, chart breaks down")
        return out, f

    def phase_coords(self, y):
        out = np.array(y, dtype=float, copy=True)
        out[0] -= 2.0 * math.pi * math.floor((out[0] + math.pi)
                                             / (2.0 * math.pi))
        if out[0] <= -math.pi:
            out[0] = math.pi
        return out

    def phase_coords_many(self, ys):
        out = np.array(ys, dtype=float, copy=True)
        psi = out[:, 0]
        psi -= 2.0 * math.pi * np.floor((psi + math.pi) / (2.0 * math.pi))
        psi[psi <= -math.pi] = math.pi
        return out

    def raise_for_state(self, t, y):
        self.rhs(t, y)
        from ..errors import StepSizeUnderflow
        raise StepSizeUnderflow(f"step control failed near t={t}")
