"""JSON configuration documents.

A document has exactly the top-level keys ``lattice``, ``params``, ``drive``
and optionally ``run``; unknown keys anywhere are rejected. See README for the
schema. ``dump_config`` followed by ``parse_config`` reproduces a
:class:`~optoring.model.ModelParams` bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .model import (DRIVE_MODES, DriveSpec, LatticeSpec, ModelParams, bare_detuning,
                    build_open_chain, build_ring)

TOP_KEYS = {"lattice", "params", "drive", "run"}
LATTICE_KEYS = {"topology", "L", "adjacency"}
PARAM_KEYS = {"omega_m", "delta", "delta_tilde", "g", "J", "gamma_c", "gamma_m", "nbar"}
DRIVE_KEYS = {"mode", "F_magnitude", "alpha_magnitude", "phi", "phi_n", "phases"}
RUN_KEYS = {"grid", "J_over_gamma_c", "ridge", "squeezing"}
GRID_KEYS = {"axes", "derived"}
AXIS_KEYS = {"name", "min", "max", "steps"}
RIDGE_KEYS = {"step", "xatol", "window"}
SQUEEZING_KEYS = {"G_plus", "G_minus", "nu"}


@dataclass(frozen=True, eq=False)
class Config:
    params: ModelParams
    run: dict = field(default_factory=dict)
    source: str = ""


class _Locator:
    """Maps a key path back to an approximate line/column in the source text."""

    def __init__(self, text):
        self.text = text

    def position(self, key):
        if not self.text or key is None:
            return None, None
        idx = self.text.find(f'"{key}"')
        if idx < 0:
            return None, None
        line = self.text.count("\n", 0, idx) + 1
        column = idx - (self.text.rfind("\n", 0, idx) + 1) + 1
        return line, column

    def error(self, message, key=None):
        line, column = self.position(key)
        return ConfigError(message, line, column)


def _check_keys(obj, allowed, where, loc, required=()):
    if not isinstance(obj, dict):
        raise loc.error(f"{where} must be an object")
    for key in obj:
        if key not in allowed:
            raise loc.error(f"unknown key {key!r} in {where}", key)
    for key in required:
        if key not in obj:
            raise loc.error(f"missing required key {key!r} in {where}")


def _number(value, name, loc):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise loc.error(f"{name} must be a number", name)
    if not math.isfinite(value):
        raise loc.error(f"{name} must be finite", name)
    return float(value)


def _number_or_list(value, name, loc):
    if isinstance(value, list):
        return np.array([_number(v, name, loc) for v in value])
    return _number(value, name, loc)


def _parse_lattice(obj, loc):
    _check_keys(obj, LATTICE_KEYS, "lattice", loc, required=("topology",))
    topology = obj["topology"]
    try:
        if topology == "custom":
            if "adjacency" not in obj:
                raise loc.error("custom lattice needs an adjacency matrix", "topology")
            A = np.array(obj["adjacency"], dtype=float)
            if A.ndim != 2:
                raise loc.error("adjacency must be a square matrix", "adjacency")
            if "L" in obj and obj["L"] != A.shape[0]:
                raise loc.error("L disagrees with adjacency size", "L")
            return LatticeSpec(A.shape[0], A, "custom")
        if "adjacency" in obj:
            raise loc.error("adjacency is only allowed for custom lattices", "adjacency")
        L = obj.get("L")
        if isinstance(L, bool) or not isinstance(L, int):
            raise loc.error("L must be an integer", "L")
        if topology == "ring":
            return build_ring(L)
        if topology == "open_chain":
            return build_open_chain(L)
    except (DomainError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise loc.error(f"invalid lattice: {exc}", "lattice") from exc
    raise loc.error(f"unknown topology {topology!r}", "topology")


def _parse_drive(obj, L, loc):
    _check_keys(obj, DRIVE_KEYS, "drive", loc, required=("mode",))
    mode = obj["mode"]
    if mode not in DRIVE_MODES:
        raise loc.error(f"unknown drive mode {mode!r}", "mode")
    if "phi" in obj and "phi_n" in obj:
        raise loc.error("give either phi or phi_n, not both", "phi_n")
    if "phi_n" in obj:
        n = obj["phi_n"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise loc.error("phi_n must be an integer", "phi_n")
        phi = 2 * math.pi * n / L
    else:
        phi = _number(obj.get("phi", 0.0), "phi", loc)
    phases = None
    if obj.get("phases") is not None:
        phases = _number_or_list(obj["phases"], "phases", loc)
        if np.ndim(phases) != 1 or len(phases) != L:
            raise loc.error(f"phases must be a list of length {L}", "phases")
    kwargs = {}
    for key in ("F_magnitude", "alpha_magnitude"):
        if key in obj:
            kwargs[key] = _number(obj[key], key, loc)
    try:
        return DriveSpec(mode, phi=phi, phases=phases, **kwargs)
    except DomainError as exc:
        raise loc.error(f"invalid drive: {exc}", "drive") from exc


def _parse_params(obj, lattice, drive, loc):
    _check_keys(obj, PARAM_KEYS, "params", loc,
                required=("g", "J", "gamma_c", "gamma_m", "nbar"))
    values = {k: _number_or_list(v, k, loc) for k, v in obj.items()}
    values.setdefault("omega_m", 1.0)
    if ("delta" in values) == ("delta_tilde" in values):
        raise loc.error("give exactly one of delta or delta_tilde", "params")
    if "delta_tilde" in values:
        if drive.mode != "alpha_prescribed":
            raise loc.error("delta_tilde requires an alpha_prescribed drive", "delta_tilde")
        values["delta"] = bare_detuning(values.pop("delta_tilde"), values["g"],
                                        drive.alpha_magnitude, values["omega_m"])
    try:
        return ModelParams(lattice=lattice, drive=drive, **values)
    except DomainError as exc:
        raise loc.error(f"invalid params: {exc}", "params") from exc


def _parse_run(obj, loc):
    _check_keys(obj, RUN_KEYS, "run", loc)
    run = dict(obj)
    if "grid" in run:
        grid = run["grid"]
        _check_keys(grid, GRID_KEYS, "run.grid", loc, required=("axes",))
        if not isinstance(grid["axes"], list) or not 1 <= len(grid["axes"]) <= 2:
            raise loc.error("run.grid.axes must list one or two axes", "axes")
        for axis in grid["axes"]:
            _check_keys(axis, AXIS_KEYS, "grid axis", loc, required=AXIS_KEYS)
        derived = grid.get("derived", [])
        if not isinstance(derived, list) or not all(isinstance(d, str) for d in derived):
            raise loc.error("run.grid.derived must be a list of strings", "derived")
    if "J_over_gamma_c" in run:
        vals = run["J_over_gamma_c"]
        if not isinstance(vals, list) or not vals:
            raise loc.error("run.J_over_gamma_c must be a non-empty list", "J_over_gamma_c")
        run["J_over_gamma_c"] = [_number(v, "J_over_gamma_c", loc) for v in vals]
    if "ridge" in run:
        _check_keys(run["ridge"], RIDGE_KEYS, "run.ridge", loc)
    if "squeezing" in run:
        _check_keys(run["squeezing"], SQUEEZING_KEYS, "run.squeezing", loc,
                    required=("G_plus", "G_minus"))
    return run


def parse_config(text: str) -> Config:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    loc = _Locator(text)
    _check_keys(doc, TOP_KEYS, "top level", loc, required=("lattice", "params", "drive"))
    lattice = _parse_lattice(doc["lattice"], loc)
    drive = _parse_drive(doc["drive"], lattice.L, loc)
    params = _parse_params(doc["params"], lattice, drive, loc)
    run = _parse_run(doc.get("run", {}), loc)
    return Config(params=params, run=run, source=text)


def load_config(path) -> Config:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def params_to_dict(params: ModelParams) -> dict:
    lat = params.lattice
    lattice = {"topology": lat.topology_tag, "L": lat.L}
    if lat.topology_tag == "custom":
        lattice["adjacency"] = lat.adjacency.astype(int).tolist()
    drive = {"mode": params.drive.mode, "phi": params.drive.phi}
    if params.drive.mode == "amplitude_driven":
        drive["F_magnitude"] = params.drive.F_magnitude
    else:
        drive["alpha_magnitude"] = params.drive.alpha_magnitude
    if params.drive.phases is not None:
        drive["phases"] = params.drive.phases.tolist()
    body = {name: getattr(params, name).tolist()
            for name in ("omega_m", "delta", "g", "gamma_c", "gamma_m", "nbar")}
    body["J"] = params.J
    return {"lattice": lattice, "params": body, "drive": drive}


def dump_config(params: ModelParams, run: dict | None = None) -> str:
    doc = params_to_dict(params)
    if run:
        doc["run"] = run
    return json.dumps(doc, indent=2)
