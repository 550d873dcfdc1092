"""Monte-Carlo sweep over the chain coupling square.

For every node of a grid over the (eps1, eps2) coupling parameters,
the scanner integrates a batch of pseudo-random initial conditions,
sections each trajectory on the six default planes through its
reduced initial point, classifies the clouds, and records the
proportion of samples showing no curve on any plane. Cells along
eps1 = 0 decouple the first segment and are integrable, so that
column should stand out as the maximum of the proportion field; the
marginal over eps2 summarizes this per column.

Determinism is a hard contract here: every sample draws from its own
counter-based substream keyed by (seed, cell row, cell column, sample
index), and the results grid is assembled by index, so the output is
a pure function of the configuration regardless of how many workers
executed it, and extending samples_per_cell leaves earlier samples'
verdicts unchanged.

A trajectory that cannot be continued (constraint singularity, step
underflow) is recorded as an aborted sample; it counts toward the
denominator but never toward the no-curve count, so failures reduce
the proportion instead of hiding.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .classify import ClassifierConfig, VerdictLabel, classify
from .errors import PhasesecError
from .integrate import IntegratorConfig, integrate_trajectory
from .reduction import ReducedState, embed
from .sections import SectionCollector, default_planes
from .systems import PendulumParams, PendulumSystem
from .angles import wrap_angle

__all__ = [
    "ScanConfig",
    "SampleRecord",
    "ScanCell",
    "ScanResult",
    "sample_initial_state",
    "run_cell",
    "scan_grid",
]

OUTCOME_NO_CURVES = "no_curves"
OUTCOME_CURVES = "curves"
OUTCOME_ABORTED = "aborted"


def _scan_classifier():
    # the scan slab is wide so that curve verdicts survive the slab
    # halving check with enough points; the diameter factors shrink in
    # proportion to keep the absolute geometry thresholds unchanged
    return ClassifierConfig(point_diam_factor=5.0, curve_diam_factor=25.0)


@dataclass(frozen=True)
class ScanConfig:
    """Everything that determines a scan's output.

    The defaults are desk scale: an 11 x 11 grid at step 0.1 with 16
    samples per cell and shortened trajectories. velocity_scale bounds
    the uniform draw of the three angular rates; energy is not fixed
    across samples, so verdict statistics depend on it.

    Two deterministic early stops keep cell cost bounded. A trajectory
    stops once ``max_crossings`` accepted points have accumulated over
    all planes (degenerate sections at decoupled couplings otherwise
    soak up points without limit), and a trajectory that has fewer
    than ``sparse_stop_points`` accepted points by ``sparse_stop_time``
    stops early, since it cannot reach a classifiable cloud within
    t_end anyway. Both depend only on trajectory content, never on
    wall clock or thread count.
    """

    eps1_range: tuple = (0.0, 1.0)
    eps2_range: tuple = (0.0, 1.0)
    grid_step: float = 0.1
    samples_per_cell: int = 16
    seed: int = 0
    t_end: float = 1200.0
    velocity_scale: float = 1.5
    slab_halfwidth: float = 0.16
    plane_rule: str = "initial"
    rel_tol: float = 1e-7
    abs_tol: float = 1e-9
    max_step: float = 1.0
    projection_tol: float = 1e-11
    baumgarte_gamma: float = 10.0
    max_crossings: int = 240
    sparse_stop_time: float = 300.0
    sparse_stop_points: int = 4
    lengths: tuple = (1.0, 1.0, 1.0)
    masses: tuple = (1.0, 1.0, 1.0)
    classifier: ClassifierConfig = field(default_factory=_scan_classifier)

    def __post_init__(self):
        if self.grid_step <= 0.0:
            raise ValueError("grid_step must be positive")
        if self.samples_per_cell < 1:
            raise ValueError("samples_per_cell must be at least 1")
        for name in ("eps1_range", "eps2_range"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi <= 1")
        if self.velocity_scale <= 0.0:
            raise ValueError("velocity_scale must be positive")
        if self.slab_halfwidth <= 0.0:
            raise ValueError("slab_halfwidth must be positive")
        if self.plane_rule not in ("initial", "origin"):
            raise ValueError("plane_rule must be 'initial' or 'origin'")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.max_crossings < 1:
            raise ValueError("max_crossings must be at least 1")
        if self.sparse_stop_time < 0.0:
            raise ValueError("sparse_stop_time must be nonnegative")
        if self.sparse_stop_points < 0:
            raise ValueError("sparse_stop_points must be nonnegative")
        object.__setattr__(self, "eps1_range",
                           tuple(float(v) for v in self.eps1_range))
        object.__setattr__(self, "eps2_range",
                           tuple(float(v) for v in self.eps2_range))
        object.__setattr__(self, "lengths",
                           tuple(float(v) for v in self.lengths))
        object.__setattr__(self, "masses",
                           tuple(float(v) for v in self.masses))

    def axis_values(self, which):
        lo, hi = self.eps1_range if which == 1 else self.eps2_range
        count = int(round((hi - lo) / self.grid_step)) + 1 if hi > lo else 1
        vals = lo + self.grid_step * np.arange(count)
        return np.round(np.minimum(vals, hi), 12)

    def integrator_config(self):
        return IntegratorConfig(
            rel_tol=self.rel_tol, abs_tol=self.abs_tol,
            max_step=self.max_step, projection_tol=self.projection_tol,
            baumgarte_gamma=self.baumgarte_gamma, t_end=self.t_end)

    def as_record(self):
        rec = asdict(self)
        rec["classifier"] = asdict(self.classifier)
        rec["eps1_range"] = list(self.eps1_range)
        rec["eps2_range"] = list(self.eps2_range)
        rec["lengths"] = list(self.lengths)
        rec["masses"] = list(self.masses)
        return rec

    @classmethod
    def from_record(cls, rec):
        rec = dict(rec)
        if "classifier" in rec and isinstance(rec["classifier"], dict):
            rec["classifier"] = ClassifierConfig(**rec["classifier"])
        for key in ("eps1_range", "eps2_range", "lengths", "masses"):
            if key in rec:
                rec[key] = tuple(rec[key])
        return cls(**rec)


@dataclass(frozen=True)
class SampleRecord:
    index: int
    outcome: str
    labels: tuple
    error: str = ""

    def as_record(self):
        return {"index": self.index, "outcome": self.outcome,
                "labels": list(self.labels), "error": self.error}


@dataclass(frozen=True)
class ScanCell:
    eps1: float
    eps2: float
    n_samples: int
    n_empty_or_points: int
    proportion: float
    samples: tuple

    def as_record(self):
        return {
            "eps1": self.eps1, "eps2": self.eps2,
            "n_samples": self.n_samples,
            "n_empty_or_points": self.n_empty_or_points,
            "proportion": self.proportion,
            "samples": [s.as_record() for s in self.samples],
        }


@dataclass(frozen=True)
class ScanResult:
    config: ScanConfig
    eps1_values: tuple
    eps2_values: tuple
    cells: tuple          # cells[i][j] for (eps1_values[i], eps2_values[j])

    @property
    def proportions(self):
        return np.array([[c.proportion for c in row] for row in self.cells])

    @property
    def marginal_eps1(self):
        """Mean proportion per eps1 column (averaged over eps2)."""
        return self.proportions.mean(axis=1)

    def as_record(self):
        return {
            "schema_version": 1,
            "config": self.config.as_record(),
            "eps1_values": list(self.eps1_values),
            "eps2_values": list(self.eps2_values),
            "cells": [[c.as_record() for c in row] for row in self.cells],
            "marginal_eps1": [float(v) for v in self.marginal_eps1],
        }


def sample_initial_state(params, rng, velocity_scale=1.0):
    """Pseudo-random chain state: uniform segment angles and rates.

    The three absolute segment angles are uniform on (-pi, pi], the
    three angular rates uniform on [-w, w]; the Cartesian state is
    reconstructed through the angle parametrization, hence exactly on
    the constraint manifold up to roundoff.
    """
    alphas = rng.uniform(-math.pi, math.pi, 3)
    rates = rng.uniform(-velocity_scale, velocity_scale, 3)
    reduced = ReducedState(
        beta1=wrap_angle(alphas[1] - alphas[0]),
        beta2=wrap_angle(alphas[2] - alphas[1]),
        beta1_rate=rates[1] - rates[0],
        beta2_rate=rates[2] - rates[1])
    return embed(params, reduced, base_angle=float(alphas[0]),
                 base_rate=float(rates[0]))


def _sample_rng(seed, cell_key, sample_index):
    ss = np.random.SeedSequence((int(seed), int(cell_key[0]),
                                 int(cell_key[1]), int(sample_index)))
    return np.random.Generator(np.random.Philox(ss))


def _run_sample(cfg: ScanConfig, params, system, icfg, rng, index):
    state0 = sample_initial_state(params, rng, cfg.velocity_scale)
    y0 = system.prepare(state0.as_vector(), cfg.projection_tol)
    if cfg.plane_rule == "initial":
        ref = system.phase_coords(y0)
    else:
        ref = np.zeros(4)
    planes = default_planes(ref, slab_halfwidth=cfg.slab_halfwidth,
                            angular_mask=system.angular_mask)
    coll = SectionCollector(planes, phase_map=system.phase_coords,
                            phase_map_many=system.phase_coords_many,
                            max_crossings=cfg.max_crossings)
    sparse_t = cfg.sparse_stop_time
    sparse_n = cfg.sparse_stop_points

    def observer(sample):
        stop = coll.observe(sample)
        if sparse_t > 0.0 and sample.t1 >= sparse_t \
                and coll.n_accepted < sparse_n:
            return True
        return stop

    try:
        integrate_trajectory(system, y0, icfg, observer=observer)
    except PhasesecError as exc:
        return SampleRecord(index, OUTCOME_ABORTED, (),
                            f"{type(exc).__name__}: {exc}")
    clouds = coll.clouds()
    labels = []
    for cloud in clouds:
        verdict = classify(cloud, cfg.classifier)
        if verdict.label is VerdictLabel.CURVES:
            # a curve claim must survive halving the slab
            half = classify(
                cloud.refiltered(0.5 * cloud.plane.slab_halfwidth),
                cfg.classifier)
            if half.label is not VerdictLabel.CURVES:
                verdict = None
        labels.append(verdict.label.value if verdict is not None
                      else VerdictLabel.INCONCLUSIVE.value)
    outcome = (OUTCOME_CURVES
               if VerdictLabel.CURVES.value in labels
               else OUTCOME_NO_CURVES)
    return SampleRecord(index, outcome, tuple(labels))


def run_cell(eps1, eps2, cfg: ScanConfig, cell_key=(0, 0)) -> ScanCell:
    """All samples of one grid cell.

    cell_key is the grid index pair used to derive sample substreams;
    the default makes a standalone call identical to the (0, 0) cell
    of a scan.
    """
    if not (0.0 <= eps1 <= 1.0 and 0.0 <= eps2 <= 1.0):
        raise ValueError("coupling parameters must lie in [0, 1]")
    params = PendulumParams(lengths=cfg.lengths, masses=cfg.masses,
                            eps1=float(eps1), eps2=float(eps2), gravity=0.0)
    system = PendulumSystem(params, gamma=cfg.baumgarte_gamma)
    icfg = cfg.integrator_config()
    records = []
    for k in range(cfg.samples_per_cell):
        rng = _sample_rng(cfg.seed, cell_key, k)
        records.append(_run_sample(cfg, params, system, icfg, rng, k))
    n_ok = sum(1 for r in records if r.outcome == OUTCOME_NO_CURVES)
    return ScanCell(eps1=float(eps1), eps2=float(eps2),
                    n_samples=cfg.samples_per_cell,
                    n_empty_or_points=n_ok,
                    proportion=n_ok / cfg.samples_per_cell,
                    samples=tuple(records))


def _cell_task(args):
    i, j, e1, e2, cfg = args
    return i, j, run_cell(e1, e2, cfg, cell_key=(i, j))


def scan_grid(cfg: ScanConfig, threads=1, progress=None) -> ScanResult:
    """Evaluate every grid cell; bit-identical for any thread count.

    progress, if given, is called with (done, total) after each cell;
    it must not mutate anything the scan reads.
    """
    e1_vals = cfg.axis_values(1)
    e2_vals = cfg.axis_values(2)
    tasks = [(i, j, float(e1), float(e2), cfg)
             for i, e1 in enumerate(e1_vals)
             for j, e2 in enumerate(e2_vals)]
    grid = [[None] * len(e2_vals) for _ in e1_vals]
    done = 0
    if threads <= 1:
        for task in tasks:
            i, j, cell = _cell_task(task)
            grid[i][j] = cell
            done += 1
            if progress is not None:
                progress(done, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for i, j, cell in pool.map(_cell_task, tasks):
                grid[i][j] = cell
                done += 1
                if progress is not None:
                    progress(done, len(tasks))
    return ScanResult(config=cfg,
                      eps1_values=tuple(float(v) for v in e1_vals),
                      eps2_values=tuple(float(v) for v in e2_vals),
                      cells=tuple(tuple(row) for row in grid))
