"""Common adapter interface between concrete models and the integrator.

A system exposes a flat state vector of length `dim`, a right-hand side,
and optional hooks: manifold projection, conserved quantities, and a map
to the four phase-space coordinates that sections are taken in.
"""

from __future__ import annotations

import numpy as np

from ..errors import StepSizeUnderflow

_EMPTY = np.zeros(0)


class DynamicalSystem:
    """Base adapter. Subclasses override what applies to them.

    Attributes
    ----------
    dim : int
        Length of the flat state vector.
    rhs_kernel : callable or None
        Jit-compiled right-hand side with signature
        ``(params_vec, gamma, t, y) -> ydot``. When present the
        integrator runs its compiled stepping path. Kernels signal a
        failed evaluation by returning NaNs; `raise_for_state` turns
        that into a typed exception.
    angular_mask : tuple of bool
        Which of the four phase coordinates are circular.
    coord_names : tuple of str
        Names of the phase coordinates, used in figures and CSV headers.
    """

    dim = 0
    rhs_kernel = None
    kernel_params = _EMPTY
    gamma = 0.0
    angular_mask = (False, False, False, False)
    coord_names = ("x1", "x2", "x3", "x4")

    def rhs(self, t, y):
        raise NotImplementedError

    def project(self, y, tol):
        """Return the state pulled back onto the invariant manifold."""
        return y

    def prepare(self, y, tol):
        """Validate and normalize an initial state before integration."""
        return self.project(np.asarray(y, dtype=float), tol)

    def invariants(self, y):
        """Conserved quantities to monitor, name to value."""
        return {}

    def constraint_residual(self, y):
        return 0.0

    def correct_invariants(self, y, targets, tol):
        """Nudge the state back onto the conserved-quantity levels.

        `targets` holds the values recorded at the initial state. The
        default does nothing; systems with cheap invariant gradients
        override this so long integrations do not accumulate secular
        drift in quantities that are exact in the model.
        """
        return y

    def poststep(self, t, y, tol, targets):
        """Commit one accepted step endpoint: project, then correct.

        Returns (state, rhs_or_None). When the second element is not
        None it is the derivative at the returned state and the
        stepper reuses it as the FSAL stage; None leaves that decision
        to the stepper. The default composes `project` and
        `correct_invariants`; systems with compiled kernels override
        it to do both plus the derivative in a single dispatch.
        """
        out = self.project(y, tol)
        if targets is not None:
            out = self.correct_invariants(out, targets, tol)
        return out, None

    def monitor(self, y):
        """Invariant values and constraint residual at one state."""
        return self.invariants(y), self.constraint_residual(y)

    def phase_coords(self, y):
        """Map the flat state to the 4 coordinates sections live in."""
        return np.asarray(y, dtype=float)

    def phase_coords_many(self, ys):
        """Phase coordinates for a batch of states, one per row.

        Semantically a row-by-row `phase_coords`; the section observer
        calls this once per accepted step, so systems with a compiled
        phase map override it to amortize the dispatch.
        """
        ys = np.asarray(ys, dtype=float)
        return np.array([self.phase_coords(y) for y in ys])

    def raise_for_state(self, t, y):
        """Diagnose a state the stepper gave up on and raise the cause."""
        raise StepSizeUnderflow(f"integration cannot continue at t={t}")


class CallableSystem(DynamicalSystem):
    """Wrap a plain Python function as a system, for tests and demos."""

    def __init__(self, dim, rhs, invariants=None, phase_coords=None,
                 angular_mask=None, coord_names=None):
        self.dim = dim
        self._rhs = rhs
        self._invariants = invariants
        self._phase = phase_coords
        if angular_mask is not None:
            self.angular_mask = tuple(angular_mask)
        if coord_names is not None:
            self.coord_names = tuple(coord_names)

    def rhs(self, t, y):
        return np.asarray(self._rhs(t, y), dtype=float)

    def invariants(self, y):
        if self._invariants is None:
            return {}
        return self._invariants(y)

    def phase_coords(self, y):
        if self._phase is None:
            return np.asarray(y, dtype=float)
        return np.asarray(self._phase(y), dtype=float)
