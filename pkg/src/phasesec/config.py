"""Run configuration: INI-style text files where every key has a default.

An empty file is a valid configuration. The fully resolved mapping (all
defaults filled in) is what run manifests record; loading that mapping
back reproduces the run, which is the determinism contract the command
line tool is tested against.

Values are validated twice: types and enumerations here, with file/line
diagnostics, and numeric ranges by the constructed dataclasses, whose
ValueError is re-raised as ConfigError pointing at the section.
"""

from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import replace

from .classify import ClassifierConfig
from .errors import ConfigError
from .integrate import IntegratorConfig
from .kamscan import ScanConfig
from .reduction import ReducedState, embed
from .systems.pendulum import PendulumParams, PendulumSystem
from .systems.satellite import SatelliteParams, SatelliteState, SatelliteSystem

__all__ = ["RunConfig", "load_config", "config_from_record",
           "default_config_text"]

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _parse_float(text):
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"not a number: {text!r}")


def _parse_int(text):
    try:
        return int(text, 0)
    except ValueError:
        raise ValueError(f"not an integer: {text!r}")


def _parse_bool(text):
    try:
        return _BOOL_WORDS[text.strip().lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {text!r}")


def _parse_triple(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers: {text!r}")
    return tuple(_parse_float(p) for p in parts)


def _opt(parser):
    def parse(text):
        if text.strip().lower() in ("", "none"):
            return None
        return parser(text)
    parse.optional = True
    return parse


def _choice(*options):
    def parse(text):
        value = text.strip().lower()
        if value not in options:
            raise ValueError(f"must be one of {', '.join(options)}: {text!r}")
        return value
    return parse


# section -> key -> (parser, default, doc)
_SCHEMA = {
    "system": {
        "kind": (_choice("pendulum", "satellite"), "pendulum",
                 "which model to run"),
        "eps1": (_parse_float, 1.0, "segment-2 anchor fraction in [0, 1]"),
        "eps2": (_parse_float, 1.0, "segment-3 anchor fraction in [0, 1]"),
        "gravity": (_parse_float, 0.0, "gravity along -y (pendulum)"),
        "lengths": (_parse_triple, (1.0, 1.0, 1.0), "segment lengths"),
        "masses": (_parse_triple, (1.0, 1.0, 1.0), "point masses"),
        "alpha": (_parse_float, 4.0 / 3.0, "inertia ratio (satellite)"),
        "beta": (_parse_float, 0.0, "orbit eccentricity knob (satellite; "
                                    "only 0 is supported)"),
    },
    "initial": {
        "beta1": (_parse_float, 0.4, "relative angle 1 (pendulum)"),
        "beta2": (_parse_float, -0.9, "relative angle 2 (pendulum)"),
        "beta1_rate": (_parse_float, 0.35, "relative rate 1 (pendulum)"),
        "beta2_rate": (_parse_float, 0.55, "relative rate 2 (pendulum)"),
        "base_angle": (_parse_float, 0.0, "absolute angle of segment 1"),
        "base_rate": (_parse_float, 0.0, "rotation rate of segment 1"),
        "psi": (_parse_float, 0.28, "libration angle (satellite)"),
        "theta": (_parse_float, 0.82, "nutation angle (satellite)"),
        "p_psi": (_parse_float, 0.15, "libration momentum (satellite)"),
        "p_theta": (_parse_float, 0.37, "nutation momentum (satellite)"),
    },
    "integrator": {
        "rel_tol": (_parse_float, 1e-10, "relative tolerance"),
        "abs_tol": (_parse_float, 1e-12, "absolute tolerance"),
        "max_step": (_parse_float, math.inf, "largest step size"),
        "projection_tol": (_parse_float, 1e-12,
                           "constraint residual bound after projection"),
        "baumgarte_gamma": (_parse_float, 10.0,
                            "constraint feedback rate (pendulum)"),
        "invariant_correction": (_parse_bool, True,
                                 "re-pin conserved quantities each step"),
        "t_end": (_parse_float, 100.0, "integration end time"),
        "max_crossings": (_opt(_parse_int), None,
                          "stop after this many section crossings"),
        "first_step": (_opt(_parse_float), None,
                       "seed step size (default: automatic)"),
    },
    "sections": {
        "slab_halfwidth": (_parse_float, 1e-3,
                           "tolerance band on the second plane functional"),
        "plane_rule": (_choice("initial", "origin"), "initial",
                       "anchor default planes at the initial point or 0"),
    },
    "classifier": {
        "n_min": (_parse_int, 10, "fewer points than this is Empty"),
        "link_factor": (_parse_float, 5.0,
                        "cluster linking distance over median NN spacing"),
        "point_diam_factor": (_parse_float, 10.0,
                              "max cluster diameter for Points, in slabs"),
        "curve_diam_factor": (_parse_float, 50.0,
                              "min cluster diameter for Curves, in slabs"),
        "dim_lo": (_parse_float, 0.3, "dimension ceiling for Points"),
        "dim_hi": (_parse_float, 0.7, "dimension floor for Curves"),
    },
    "scan": {
        "eps1_min": (_parse_float, 0.0, "scan domain lower edge, axis 1"),
        "eps1_max": (_parse_float, 1.0, "scan domain upper edge, axis 1"),
        "eps2_min": (_parse_float, 0.0, "scan domain lower edge, axis 2"),
        "eps2_max": (_parse_float, 1.0, "scan domain upper edge, axis 2"),
        "grid_step": (_parse_float, 0.1, "grid spacing on both axes"),
        "samples_per_cell": (_parse_int, 16,
                             "pseudo-random starts per grid cell"),
        "seed": (_parse_int, 0, "root seed of the sample substreams"),
        "t_end": (_parse_float, 1200.0, "trajectory length per sample"),
        "velocity_scale": (_parse_float, 1.5,
                           "uniform bound on sampled angular rates"),
        "slab_halfwidth": (_parse_float, 0.16, "section slab for scan runs; "
                           "wide so curve verdicts survive slab halving"),
        "plane_rule": (_choice("initial", "origin"), "initial",
                       "plane anchoring rule for scan runs"),
        "rel_tol": (_parse_float, 1e-7, "relative tolerance for scan runs"),
        "abs_tol": (_parse_float, 1e-9, "absolute tolerance for scan runs"),
        "max_step": (_parse_float, 1.0, "step cap for scan runs"),
        "projection_tol": (_parse_float, 1e-11,
                           "residual bound for scan runs"),
        "baumgarte_gamma": (_parse_float, 10.0,
                            "constraint feedback rate for scan runs"),
        "max_crossings": (_parse_int, 240,
                          "stop a sample after this many accepted points"),
        "sparse_stop_time": (_parse_float, 300.0,
                             "give up on samples still sparse by this time "
                             "(0 disables)"),
        "sparse_stop_points": (_parse_int, 4,
                               "accepted points needed by sparse_stop_time"),
        "point_diam_factor": (_parse_float, 5.0,
                              "Points diameter bound in scan slabs "
                              "(overrides [classifier] for scans)"),
        "curve_diam_factor": (_parse_float, 25.0,
                              "Curves diameter floor in scan slabs "
                              "(overrides [classifier] for scans)"),
    },
    "output": {
        "dump_stride": (_parse_int, 1,
                        "keep every n-th accepted step in --dump output"),
    },
}


def _key_line(text, section, key):
    """Best-effort line number of `key` inside `[section]`."""
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
        elif current == section and stripped and stripped[0] not in "#;":
            name = re.split(r"[=:]", stripped, maxsplit=1)[0].strip().lower()
            if name == key:
                return lineno
    return None


def _section_line(text, section):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("[") and stripped.endswith("]") \
                and stripped[1:-1].strip().lower() == section:
            return lineno
    return None


class RunConfig:
    """Fully resolved configuration with typed accessors.

    `values` is a nested plain dict, section -> key -> typed value,
    with every key present. It serializes to the manifest via
    `as_record` and reconstructs via `config_from_record`.
    """

    def __init__(self, values):
        self.values = values

    def __getitem__(self, section):
        return self.values[section]

    def as_record(self):
        rec = {}
        for section, keys in self.values.items():
            out = {}
            for key, value in keys.items():
                if isinstance(value, tuple):
                    value = list(value)
                elif isinstance(value, float) and not math.isfinite(value):
                    value = "inf" if value > 0 else "-inf"
                out[key] = value
            rec[section] = out
        return rec

    def build_system(self):
        sysd = self.values["system"]
        gamma = self.values["integrator"]["baumgarte_gamma"]
        try:
            if sysd["kind"] == "pendulum":
                params = PendulumParams(
                    lengths=sysd["lengths"], masses=sysd["masses"],
                    eps1=sysd["eps1"], eps2=sysd["eps2"],
                    gravity=sysd["gravity"])
                return PendulumSystem(params, gamma=gamma)
            params = SatelliteParams(alpha=sysd["alpha"], beta=sysd["beta"])
            return SatelliteSystem(params)
        except ValueError as exc:
            raise ConfigError(str(exc), section="system") from exc

    def initial_vector(self, system):
        ini = self.values["initial"]
        try:
            if self.values["system"]["kind"] == "pendulum":
                reduced = ReducedState(
                    beta1=ini["beta1"], beta2=ini["beta2"],
                    beta1_rate=ini["beta1_rate"],
                    beta2_rate=ini["beta2_rate"])
                state = embed(system.params, reduced,
                              base_angle=ini["base_angle"],
                              base_rate=ini["base_rate"])
                return state.as_vector()
            state = SatelliteState(psi=ini["psi"], theta=ini["theta"],
                                   p_psi=ini["p_psi"],
                                   p_theta=ini["p_theta"])
            return state.as_vector()
        except ValueError as exc:
            raise ConfigError(str(exc), section="initial") from exc

    def integrator_config(self):
        try:
            return IntegratorConfig(**self.values["integrator"])
        except ValueError as exc:
            raise ConfigError(str(exc), section="integrator") from exc

    def classifier_config(self):
        try:
            return ClassifierConfig(**self.values["classifier"])
        except ValueError as exc:
            raise ConfigError(str(exc), section="classifier") from exc

    def scan_config(self, seed=None):
        s = self.values["scan"]
        sysd = self.values["system"]
        try:
            # scans reuse [classifier] except the diameter factors,
            # which must scale with the wider scan slab
            classifier = replace(self.classifier_config(),
                                 point_diam_factor=s["point_diam_factor"],
                                 curve_diam_factor=s["curve_diam_factor"])
            return ScanConfig(
                eps1_range=(s["eps1_min"], s["eps1_max"]),
                eps2_range=(s["eps2_min"], s["eps2_max"]),
                grid_step=s["grid_step"],
                samples_per_cell=s["samples_per_cell"],
                seed=s["seed"] if seed is None else int(seed),
                t_end=s["t_end"],
                velocity_scale=s["velocity_scale"],
                slab_halfwidth=s["slab_halfwidth"],
                plane_rule=s["plane_rule"],
                rel_tol=s["rel_tol"], abs_tol=s["abs_tol"],
                max_step=s["max_step"],
                projection_tol=s["projection_tol"],
                baumgarte_gamma=s["baumgarte_gamma"],
                max_crossings=s["max_crossings"],
                sparse_stop_time=s["sparse_stop_time"],
                sparse_stop_points=s["sparse_stop_points"],
                lengths=sysd["lengths"], masses=sysd["masses"],
                classifier=classifier)
        except ValueError as exc:
            raise ConfigError(str(exc), section="scan") from exc


def _defaults():
    return {section: {key: spec[1] for key, spec in keys.items()}
            for section, keys in _SCHEMA.items()}


def load_config(path):
    """Parse a config file (or a run manifest) into a RunConfig.

    A file whose first non-blank character is `{` is treated as JSON:
    either a run manifest (its `config` entry is used) or a bare
    resolved-config mapping.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    if text.lstrip().startswith("{"):
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc.msg}",
                              line=exc.lineno) from exc
        if not isinstance(rec, dict):
            raise ConfigError(f"top level of {path} is not an object")
        return config_from_record(rec.get("config", rec))
    return _parse_ini(text)


def _parse_ini(text):
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        message = str(exc).replace("\n", " ")
        if line is not None:
            message = f"line {line}: {message}"
        raise ConfigError(message, line=line) from exc

    values = _defaults()
    for section in parser.sections():
        name = section.strip().lower()
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]",
                              section=name,
                              line=_section_line(text, name))
        for key, raw in parser.items(section):
            if key not in _SCHEMA[name]:
                raise ConfigError("unknown key", section=name, key=key,
                                  line=_key_line(text, name, key))
            parse = _SCHEMA[name][key][0]
            try:
                values[name][key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(str(exc), section=name, key=key,
                                  line=_key_line(text, name, key)) from exc
    return RunConfig(values)


def config_from_record(rec):
    """Rebuild a RunConfig from a manifest's resolved-config mapping."""
    if not isinstance(rec, dict):
        raise ConfigError("config record is not an object")
    values = _defaults()
    for section, keys in rec.items():
        if section not in _SCHEMA:
            raise ConfigError("unknown section in record", section=section)
        if not isinstance(keys, dict):
            raise ConfigError("section is not an object", section=section)
        for key, value in keys.items():
            if key not in _SCHEMA[section]:
                raise ConfigError("unknown key in record",
                                  section=section, key=key)
            parse = _SCHEMA[section][key][0]
            try:
                if value is None:
                    if not getattr(parse, "optional", False):
                        raise ValueError("null is not allowed here")
                elif isinstance(value, bool):
                    pass
                elif isinstance(value, str):
                    value = parse(value)
                elif isinstance(value, list):
                    value = tuple(float(v) for v in value)
                elif isinstance(value, (int, float)):
                    value = parse(repr(value))
                else:
                    raise ValueError(f"unsupported value {value!r}")
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), section=section,
                                  key=key) from exc
            values[section][key] = value
    return RunConfig(values)


def default_config_text():
    """A complete config file with every key at its default, documented."""
    lines = ["# phasesec run configuration: every key is optional and",
             "# shown here at its default value.", ""]
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (parse, default, doc) in keys.items():
            if isinstance(default, tuple):
                shown = ", ".join(repr(v) for v in default)
            elif default is None:
                shown = "none"
            elif isinstance(default, bool):
                shown = "true" if default else "false"
            elif isinstance(default, str):
                shown = default
            else:
                shown = repr(default)
            lines.append(f"{key} = {shown}  # {doc}")
        lines.append("")
    return "\n".join(lines)
