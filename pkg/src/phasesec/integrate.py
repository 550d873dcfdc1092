"""Embedded adaptive Runge-Kutta 5(4) with dense output.

The pair is the classic Dormand-Prince tableau; dense output is the
quartic continuous extension built from the seven stages. Both are
standard published coefficients. The implementation is written as
plain scalar loops so the identical source runs interpreted for toy
systems and numba-compiled for the production models; fastmath stays
off, so results are bit-identical either way and across process
counts.

Two things are nonstandard relative to an off-the-shelf solver and are
the reason this module exists:

* after every accepted step the state is pulled back onto the system's
  invariant manifold (constraint projection for the chain, a no-op for
  unconstrained systems) and, by default, nudged back onto the
  conserved-quantity levels of the initial state; the FSAL stage is
  refreshed whenever either moved the state;
* observers receive every accepted step together with the dense-output
  segment, which is what the section detector needs to locate plane
  crossings inside a step.

Step-size control is the usual I controller with safety 0.9, growth
clamped to 5x and shrinkage to 0.1x per attempt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._jit import HAVE_NUMBA, compile_closure

__all__ = [
    "IntegratorConfig",
    "DenseSegment",
    "TrajectorySample",
    "TrajectorySummary",
    "integrate_trajectory",
    "step",
]

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# weights of the embedded 4th-order error estimate
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0,
                                71.0 / 1920.0, -17253.0 / 339200.0,
                                22.0 / 525.0, -1.0 / 40.0)

# quartic dense-output matrix (stages x polynomial order)
_DENSE_P = np.array([
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
     -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
     69997945.0 / 29380423.0],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.1
_MAX_FACTOR = 5.0


def _stages_impl(rhs, pv, gamma, t, y, h, k1, atol, rtol):
    """All seven stages of one trial step.

    Returns (y_new, K, err_norm). err_norm is the scaled RMS error of
    the embedded pair; NaN anywhere in the stages makes it non-finite,
    which the caller treats as a rejection.
    """
    n = y.shape[0]
    K = np.empty((7, n))
    ys = np.empty(n)
    for i in range(n):
        K[0, i] = k1[i]

    for i in range(n):
        ys[i] = y[i] + h * (_A21 * K[0, i])
    k = rhs(pv, gamma, t + _C2 * h, ys)
    for i in range(n):
        K[1, i] = k[i]

    for i in range(n):
        ys[i] = y[i] + h * (_A31 * K[0, i] + _A32 * K[1, i])
    k = rhs(pv, gamma, t + _C3 * h, ys)
    for i in range(n):
        K[2, i] = k[i]

    for i in range(n):
        ys[i] = y[i] + h * (_A41 * K[0, i] + _A42 * K[1, i] + _A43 * K[2, i])
    k = rhs(pv, gamma, t + _C4 * h, ys)
    for i in range(n):
        K[3, i] = k[i]

    for i in range(n):
        ys[i] = y[i] + h * (_A51 * K[0, i] + _A52 * K[1, i]
                            + _A53 * K[2, i] + _A54 * K[3, i])
    k = rhs(pv, gamma, t + _C5 * h, ys)
    for i in range(n):
        K[4, i] = k[i]

    for i in range(n):
        ys[i] = y[i] + h * (_A61 * K[0, i] + _A62 * K[1, i] + _A63 * K[2, i]
                            + _A64 * K[3, i] + _A65 * K[4, i])
    k = rhs(pv, gamma, t + h, ys)
    for i in range(n):
        K[5, i] = k[i]

    y_new = np.empty(n)
    for i in range(n):
        y_new[i] = y[i] + h * (_B1 * K[0, i] + _B3 * K[2, i] + _B4 * K[3, i]
                               + _B5 * K[4, i] + _B6 * K[5, i])
    k = rhs(pv, gamma, t + h, y_new)
    for i in range(n):
        K[6, i] = k[i]

    acc = 0.0
    for i in range(n):
        err_i = h * (_E1 * K[0, i] + _E3 * K[2, i] + _E4 * K[3, i]
                     + _E5 * K[4, i] + _E6 * K[5, i] + _E7 * K[6, i])
        ay = abs(y[i])
        an = abs(y_new[i])
        sc = atol + rtol * (ay if ay > an else an)
        r = err_i / sc
        acc += r * r
    err_norm = math.sqrt(acc / n)
    return y_new, K, err_norm


_stages_compiled = compile_closure(_stages_impl) if HAVE_NUMBA else None


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and limits for one trajectory run.

    rel_tol / abs_tol enter the scaled error norm of the embedded
    pair. projection_tol bounds constraint residuals at accepted
    steps. baumgarte_gamma is the constraint-feedback rate of the
    chain dynamics. invariant_correction switches the per-step
    conserved-quantity nudge on or off; with it off, monitored
    quantities show the raw secular drift of the error control.
    t_end is the absolute end time; max_crossings, if set, lets
    section observers stop a run early after that many located
    crossings.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    projection_tol: float = 1e-12
    baumgarte_gamma: float = 10.0
    invariant_correction: bool = True
    t_end: float = 100.0
    max_crossings: int | None = None
    first_step: float | None = None

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0.0:
            raise ValueError("max_step must be positive")
        if self.projection_tol <= 0.0:
            raise ValueError("projection_tol must be positive")
        if self.t_end < 0.0:
            raise ValueError("t_end must be nonnegative")
        if self.first_step is not None and self.first_step <= 0.0:
            raise ValueError("first_step must be positive")


class DenseSegment:
    """Quartic interpolant of one accepted step.

    Evaluation uses the normalized coordinate sigma in [0, 1];
    sigma = 0 is the step start, sigma = 1 the raw step endpoint
    (before any manifold projection, which moves the state by at most
    the projection tolerance).
    """

    __slots__ = ("t0", "h", "y0", "_K", "_Q")

    def __init__(self, t0, h, y0, K):
        self.t0 = t0
        self.h = h
        self.y0 = y0
        self._K = K
        self._Q = None

    @property
    def t1(self):
        return self.t0 + self.h

    def _coeffs(self):
        if self._Q is None:
            self._Q = self._K.T @ _DENSE_P
        return self._Q

    def eval(self, sigma):
        """State at t0 + sigma * h."""
        q = self._coeffs()
        s = float(sigma)
        s2 = s * s
        p = np.array([s, s2, s2 * s, s2 * s2])
        return self.y0 + self.h * (q @ p)

    def eval_many(self, sigmas):
        q = self._coeffs()
        s = np.asarray(sigmas, dtype=float)
        p = np.empty((4, s.shape[0]))
        np.multiply(s, s, out=p[1])
        p[0] = s
        np.multiply(p[1], s, out=p[2])
        np.multiply(p[1], p[1], out=p[3])
        return self.y0[None, :] + self.h * (q @ p).T


@dataclass(frozen=True)
class TrajectorySample:
    """One accepted step: committed endpoint states plus the interpolant."""

    t0: float
    y0: np.ndarray
    t1: float
    y1: np.ndarray
    dense: DenseSegment


@dataclass
class TrajectorySummary:
    t_final: float
    state: np.ndarray
    n_steps: int
    n_rejected: int
    invariants_initial: dict
    invariant_drift: dict
    max_constraint_residual: float
    stopped_by_observer: bool = False

    def relative_drift(self, name):
        """Max drift of a monitored quantity over |initial value|."""
        ref = abs(self.invariants_initial[name])
        return self.invariant_drift[name] / max(ref, 1e-300)


class _Stepper:
    """Shared engine behind `integrate_trajectory` and `step`."""

    def __init__(self, system, t0, y0, config, targets=None):
        self.system = system
        self.config = config
        self.targets = targets
        self.t = float(t0)
        self.y = np.asarray(y0, dtype=float)
        self.pv = np.asarray(system.kernel_params, dtype=float)
        self.gamma = float(system.gamma)
        kern = getattr(system, "rhs_kernel", None)
        if kern is not None and _stages_compiled is not None:
            self._stages = _stages_compiled
            self._rhs = kern
        else:
            self._stages = _stages_impl
            py_rhs = system.rhs

            def _adapter(pv, gamma, t, y, _f=py_rhs):
                return _f(t, y)

            self._rhs = _adapter
        self.f = self._eval_rhs(self.t, self.y)
        self.h = (config.first_step if config.first_step is not None
                  else self._initial_step())
        self.h = min(self.h, config.max_step)
        self.n_rejected = 0
        self._last_rejected = False

    def _eval_rhs(self, t, y):
        out = self._rhs(self.pv, self.gamma, t, y)
        if not np.all(np.isfinite(out)):
            self.system.raise_for_state(t, y)
        return out

    def _initial_step(self):
        cfg = self.config
        scale = cfg.abs_tol + cfg.rel_tol * np.abs(self.y)
        d0 = math.sqrt(float(np.mean((self.y / scale) ** 2)))
        d1 = math.sqrt(float(np.mean((self.f / scale) ** 2)))
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        span = cfg.t_end - self.t
        if span > 0.0:
            h0 = min(h0, span)
        y1 = self.y + h0 * self.f
        f1 = self._rhs(self.pv, self.gamma, self.t + h0, y1)
        if not np.all(np.isfinite(f1)):
            return max(h0 * 1e-3, 1e-12)
        d2 = math.sqrt(float(np.mean(((f1 - self.f) / scale) ** 2))) / h0
        dm = max(d1, d2)
        h1 = (0.01 / dm) ** 0.2 if dm > 1e-15 else max(1e-6, h0 * 1e3)
        return min(100.0 * h0, h1)

    def advance(self, t_stop):
        """One accepted (projected) step, not crossing t_stop."""
        cfg = self.config
        ref = abs(t_stop) if math.isfinite(t_stop) else abs(self.t)
        tiny = 1e-14 * max(1.0, ref)
        while True:
            clipped = False
            h = min(self.h, cfg.max_step)
            if self.t + h >= t_stop:
                h = t_stop - self.t
                clipped = True
            if h < tiny:
                self.system.raise_for_state(self.t, self.y)
            y_new, K, err = self._stages(
                self._rhs, self.pv, self.gamma, self.t, self.y, h,
                self.f, cfg.abs_tol, cfg.rel_tol)
            if not math.isfinite(err):
                self.h = h * _MIN_FACTOR
                self.n_rejected += 1
                self._last_rejected = True
                continue
            if err > 1.0:
                factor = max(_MIN_FACTOR, _SAFETY * err ** -0.2)
                self.h = h * factor
                self.n_rejected += 1
                self._last_rejected = True
                continue

            t1 = t_stop if clipped else self.t + h
            dense = DenseSegment(self.t, h, self.y, K)
            y1, f1 = self.system.poststep(t1, y_new, cfg.projection_tol,
                                          self.targets)
            if f1 is None:
                if y1 is y_new or np.array_equal(y1, y_new):
                    f1 = K[6].copy()
                else:
                    f1 = self._eval_rhs(t1, y1)

            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err ** -0.2)
            if self._last_rejected:
                factor = min(1.0, factor)
            self._last_rejected = False

            sample = TrajectorySample(self.t, self.y, t1, y1, dense)
            self.t = t1
            self.y = y1
            self.f = f1
            self.h = h * factor
            return sample


def integrate_trajectory(system, y0, config, observer=None, t0=0.0):
    """Integrate from t0 to config.t_end, projecting every accepted step.

    The observer, if given, is called with each TrajectorySample and
    may return True to stop the run early. Invariants reported by the
    system are monitored at every accepted step; the summary carries
    their worst absolute drift and the worst constraint residual.

    Raises the underlying typed error (singular constraints, chart
    singularity, step underflow) if the trajectory cannot continue.
    """
    y = system.prepare(np.asarray(y0, dtype=float), config.projection_tol)
    inv0 = system.invariants(y)
    drift = {name: 0.0 for name in inv0}
    max_res = system.constraint_residual(y)
    summary = TrajectorySummary(
        t_final=float(t0), state=y, n_steps=0, n_rejected=0,
        invariants_initial=inv0, invariant_drift=drift,
        max_constraint_residual=max_res)
    t_end = config.t_end
    if t_end <= t0 + 1e-14 * max(1.0, abs(t_end)):
        return summary

    targets = inv0 if (config.invariant_correction and inv0) else None
    stepper = _Stepper(system, t0, y, config, targets)
    while True:
        sample = stepper.advance(t_end)
        summary.n_steps += 1
        summary.n_rejected = stepper.n_rejected

        cur, res = system.monitor(sample.y1)
        for name, v0 in inv0.items():
            d = abs(cur[name] - v0)
            if d > drift[name]:
                drift[name] = d
        if res > max_res:
            max_res = res
            summary.max_constraint_residual = res

        stop = observer(sample) if observer is not None else False
        if stop:
            summary.stopped_by_observer = True
        if stop or stepper.t >= t_end - 1e-14 * max(1.0, abs(t_end)):
            summary.t_final = stepper.t
            summary.state = stepper.y
            return summary


def step(system, t, y, config, h=None):
    """One accepted adaptive step from (t, y).

    Returns (t_new, y_new, h_used, dense). `h`, if given, seeds the
    step-size control instead of the automatic heuristic.
    """
    cfg = config if h is None else replace(config, first_step=h)
    y = system.prepare(np.asarray(y, dtype=float), cfg.projection_tol)
    targets = system.invariants(y) if cfg.invariant_correction else {}
    stepper = _Stepper(system, t, y, cfg, targets or None)
    sample = stepper.advance(math.inf)
    return sample.t1, sample.y1, sample.t1 - sample.t0, sample.dense
