"""Command line driver: simulate, section, scan, report.

Exit codes: 0 success, 2 configuration error (with file/line
diagnostics on stderr), 3 numeric failure of the run itself, 4
anything unexpected. All result files are written atomically after the
computation finishes, so a failed run leaves no partial artifacts.

Every computing command also writes `run_manifest.json`: tool version,
the fully resolved configuration, seed, timestamps, and digests of the
inputs and outputs. Feeding that manifest back via --config reproduces
the run bit-exactly (manifest timestamps aside). `report` re-renders
figures from saved JSON results without re-simulation and writes no
manifest of its own.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .classify import VerdictLabel, classify, obstruction_found
from .config import load_config
from .errors import ConfigError, PhasesecError
from .figures import (render_heatmap_svg, render_marginal_svg,
                      render_scatter_svg)
from .integrate import integrate_trajectory
from .kamscan import scan_grid
from .persist import (canonical_json, csv_text, sha256_bytes, sha256_file,
                      write_text_atomic)
from .sections import collect_sections, default_planes

__all__ = ["main"]


def _utc_now():
    return datetime.datetime.now(datetime.timezone.utc) \
        .strftime("%Y-%m-%dT%H:%M:%SZ")


class _Outputs:
    """Collects rendered artifacts, then writes them all atomically."""

    def __init__(self, directory):
        self.directory = directory
        self.pending = {}

    def add(self, name, text):
        self.pending[name] = text

    def write_all(self):
        os.makedirs(self.directory, exist_ok=True)
        digests = {}
        for name, text in sorted(self.pending.items()):
            path = os.path.join(self.directory, name)
            write_text_atomic(path, text)
            digests[name] = sha256_bytes(text.encode("utf-8"))
        return digests


def _manifest(command, args, cfg, started, digests, seed=None):
    inputs = {}
    if os.path.isfile(args.config):
        inputs[os.path.basename(args.config)] = sha256_file(args.config)
    return {
        "schema_version": 1,
        "tool": {"name": "phasesec", "version": __version__},
        "command": command,
        "created_utc": started,
        "finished_utc": _utc_now(),
        "seed": seed,
        "threads": getattr(args, "threads", 1),
        "config": cfg.as_record(),
        "inputs": inputs,
        "outputs": digests,
    }


def _write_manifest(out, record):
    os.makedirs(out, exist_ok=True)
    write_text_atomic(os.path.join(out, "run_manifest.json"),
                      canonical_json(record))


def _cmd_simulate(args):
    started = _utc_now()
    cfg = load_config(args.config)
    system = cfg.build_system()
    y0 = cfg.initial_vector(system)
    icfg = cfg.integrator_config()
    stride = max(1, cfg["output"]["dump_stride"])

    rows = []
    counter = [0]

    def sampler(sample):
        counter[0] += 1
        if counter[0] % stride == 0:
            coords = system.phase_coords(sample.y1)
            rows.append([1, counter[0], float(sample.t1)]
                        + [float(c) for c in coords])
        return False

    summary = integrate_trajectory(system, y0, icfg,
                                   observer=sampler if args.dump else None)

    record = {
        "schema_version": 1,
        "system": cfg["system"]["kind"],
        "t_final": summary.t_final,
        "n_steps": summary.n_steps,
        "n_rejected": summary.n_rejected,
        "invariants_initial": summary.invariants_initial,
        "invariant_drift_abs": summary.invariant_drift,
        "invariant_drift_rel": {name: summary.relative_drift(name)
                                for name in summary.invariants_initial},
        "max_constraint_residual": summary.max_constraint_residual,
        "stopped_by_observer": summary.stopped_by_observer,
    }
    outputs = _Outputs(args.out)
    outputs.add("simulate_summary.json", canonical_json(record))
    if args.dump:
        header = ["schema_version", "step", "t"] + list(system.coord_names)
        outputs.add("trajectory.csv", csv_text(header, rows))
    digests = outputs.write_all()
    _write_manifest(args.out, _manifest("simulate", args, cfg, started,
                                        digests))
    drifts = ", ".join(f"{k} drift {v:.3e}"
                       for k, v in summary.invariant_drift.items())
    print(f"simulate: t_final={summary.t_final:g} steps={summary.n_steps} "
          f"{drifts}")
    return 0


def _plane_record(cloud, verdict):
    plane = cloud.plane
    return {
        "functional1": list(plane.functional1),
        "functional2": list(plane.functional2),
        "slab_halfwidth": plane.slab_halfwidth,
        "angular_mask": list(plane.angular_mask),
        "n_points": cloud.n_points,
        "crossings_tested": cloud.crossings_tested,
        "verdict": verdict.as_record(),
        "points_uv": [[float(u), float(v)] for u, v in cloud.plane_points],
    }


def _cmd_section(args):
    started = _utc_now()
    cfg = load_config(args.config)
    system = cfg.build_system()
    icfg = cfg.integrator_config()
    y0 = system.prepare(np.asarray(cfg.initial_vector(system), dtype=float),
                        icfg.projection_tol)
    if cfg["sections"]["plane_rule"] == "initial":
        reference = system.phase_coords(y0)
    else:
        reference = np.zeros(4)
    planes = default_planes(reference,
                            slab_halfwidth=cfg["sections"]["slab_halfwidth"],
                            angular_mask=system.angular_mask)
    clouds, summary = collect_sections(system, y0, icfg, planes)
    ccfg = cfg.classifier_config()
    verdicts = [classify(cloud, ccfg) for cloud in clouds]

    record = {
        "schema_version": 1,
        "system": cfg["system"]["kind"],
        "coord_names": list(system.coord_names),
        "t_final": summary.t_final,
        "n_steps": summary.n_steps,
        "obstruction_found": obstruction_found(verdicts),
        "planes": [_plane_record(cloud, verdict)
                   for cloud, verdict in zip(clouds, verdicts)],
    }
    outputs = _Outputs(args.out)
    outputs.add("sections.json", canonical_json(record))
    header = ["schema_version", "t", "u", "v"] + list(system.coord_names)
    for k, cloud in enumerate(clouds, start=1):
        rows = [[1, float(t), float(uv[0]), float(uv[1])]
                + [float(c) for c in pt]
                for t, uv, pt in zip(cloud.times, cloud.plane_points,
                                     cloud.points)]
        outputs.add(f"section_plane{k}.csv", csv_text(header, rows))
    outputs.add("sections.svg",
                render_scatter_svg(list(zip(clouds, verdicts)),
                                   system.coord_names))
    digests = outputs.write_all()
    _write_manifest(args.out, _manifest("section", args, cfg, started,
                                        digests))
    for k, verdict in enumerate(verdicts, start=1):
        print(f"plane {k}: {verdict.label.value} "
              f"({verdict.n_points} points)")
    print("obstruction found" if obstruction_found(verdicts)
          else "no obstruction found")
    return 0


def _scan_csv(result):
    header = ["schema_version", "eps1", "eps2", "n_samples",
              "n_empty_or_points", "proportion"]
    rows = []
    for row in result.cells:
        for cell in row:
            rows.append([1, cell.eps1, cell.eps2, cell.n_samples,
                         cell.n_empty_or_points, cell.proportion])
    return csv_text(header, rows)


def _cmd_scan(args):
    started = _utc_now()
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.values["scan"]["seed"] = int(args.seed)
    scfg = cfg.scan_config()
    threads = max(1, args.threads)

    def progress(done, total):
        print(f"\rscan: {done}/{total} cells", end="", file=sys.stderr,
              flush=True)

    result = scan_grid(scfg, threads=threads, progress=progress)
    print(file=sys.stderr)

    outputs = _Outputs(args.out)
    outputs.add("scan.json", canonical_json(result.as_record()))
    outputs.add("scan.csv", _scan_csv(result))
    outputs.add("scan_heatmap.svg",
                render_heatmap_svg(result.eps1_values, result.eps2_values,
                                   result.proportions))
    outputs.add("scan_marginal.svg",
                render_marginal_svg(result.eps1_values,
                                    result.marginal_eps1))
    digests = outputs.write_all()
    _write_manifest(args.out, _manifest("scan", args, cfg, started, digests,
                                        seed=scfg.seed))
    marginal = ", ".join(f"{e:.1f}:{m:.3f}" for e, m in
                         zip(result.eps1_values, result.marginal_eps1))
    print(f"scan: marginal by eps1 -> {marginal}")
    return 0


def _load_result(path):
    if os.path.isdir(path):
        for name in ("scan.json", "sections.json"):
            candidate = os.path.join(path, name)
            if os.path.isfile(candidate):
                path = candidate
                break
        else:
            raise ConfigError(f"no scan.json or sections.json in {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh), path
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc.msg}",
                          line=exc.lineno) from exc


class _CloudView:
    """Duck-typed stand-in for SectionCloud when re-rendering from JSON."""

    def __init__(self, rec):
        from .sections import PlaneSpec
        self.plane = PlaneSpec(functional1=tuple(rec["functional1"]),
                               functional2=tuple(rec["functional2"]),
                               slab_halfwidth=rec["slab_halfwidth"],
                               angular_mask=tuple(rec["angular_mask"]))
        self.plane_points = np.array(rec["points_uv"], dtype=float) \
            if rec["points_uv"] else np.zeros((0, 2))


class _VerdictView:
    def __init__(self, rec):
        self.label = VerdictLabel(rec["label"])


def _cmd_report(args):
    record, path = _load_result(args.config)
    outputs = _Outputs(args.out)
    if "cells" in record:
        proportions = [[cell["proportion"] for cell in row]
                       for row in record["cells"]]
        marginal = record.get("marginal_eps1") \
            or [sum(row) / len(row) for row in proportions]
        outputs.add("scan_heatmap.svg",
                    render_heatmap_svg(record["eps1_values"],
                                       record["eps2_values"], proportions))
        outputs.add("scan_marginal.svg",
                    render_marginal_svg(record["eps1_values"], marginal))
    elif "planes" in record:
        panels = [(_CloudView(rec), _VerdictView(rec["verdict"]))
                  for rec in record["planes"]]
        outputs.add("sections.svg",
                    render_scatter_svg(panels, record["coord_names"]))
    else:
        raise ConfigError(f"{path} is neither a scan nor a section result")
    digests = outputs.write_all()
    for name in sorted(digests):
        print(f"report: wrote {name}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="phasesec",
        description="Phase-space section analysis of two rigid-body models.")
    parser.add_argument("--version", action="version",
                        version=f"phasesec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="config file, or a run manifest / result JSON")
    common.add_argument("--out", default=".",
                        help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the scan seed")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes for scan cells")
    common.add_argument("--dump", action="store_true",
                        help="also write per-step samples (simulate)")

    sub.add_parser("simulate", parents=[common],
                   help="integrate one trajectory and report drift")
    sub.add_parser("section", parents=[common],
                   help="section one trajectory on the default planes")
    sub.add_parser("scan", parents=[common],
                   help="Monte-Carlo sweep of the coupling square")
    sub.add_parser("report", parents=[common],
                   help="re-render figures from saved results")
    return parser


_COMMANDS = {
    "simulate": _cmd_simulate,
    "section": _cmd_section,
    "scan": _cmd_scan,
    "report": _cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PhasesecError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
