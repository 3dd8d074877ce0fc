"""Configuration documents, legacy VTK snapshots, CSV time series and manifests.

A configuration is an INI document with four sections::

    [case]     kind, t_end, order, surface_tension, curvature_override,
               regularization, pressure_init, L, H, h_fill, R, A0, k, phi_s, probe_x
    [params]   beta (required), sigma, rho1, rho2, mu1, mu2, gravity = gx, gy,
               d, delta, cfl
    [mesh]     kind = cartesian | triangles | file, nx, ny, size,
               refine_size, refine_band, path
    [output]   snapshot_every, vtk

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .cases import CaseConfig, MeshSpec, RAYLEIGH_TAYLOR, rti_sigma
from .errors import ConfigError
from .mesh import Mesh
from .model import Params, mix_properties
from .stepper import FieldSnapshot, Scheme, TimeSeries

_CASE_KEYS = {
    "kind": str, "t_end": float, "order": int, "surface_tension": str,
    "curvature_override": float, "regularization": bool, "pressure_init": str,
    "L": float, "H": float, "h_fill": float, "R": float, "A0": float, "k": float,
    "phi_s": float, "probe_x": float,
}
_PARAM_KEYS = {
    "beta": float, "sigma": float, "rho1": float, "rho2": float, "mu1": float, "mu2": float,
    "gravity": "pair", "d": float, "delta": float, "cfl": float,
}
_MESH_KEYS = {
    "kind": str, "nx": int, "ny": int, "size": float, "refine_size": float,
    "refine_band": float, "path": str,
}
_OUTPUT_KEYS = {"snapshot_every": float, "vtk": bool}
_SECTIONS = {"case": _CASE_KEYS, "params": _PARAM_KEYS, "mesh": _MESH_KEYS,
             "output": _OUTPUT_KEYS}
_SCHEME_KEYS = ("order", "surface_tension", "curvature_override", "regularization")


@dataclass(frozen=True)
class OutputSpec:
    snapshot_every: float | None = None
    vtk: bool = True


@dataclass(frozen=True)
class RunDocument:
    config: CaseConfig
    output: OutputSpec


def _convert(section, key, kind, raw):
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "pair":
            parts = [float(v) for v in text.replace(",", " ").split()]
            if len(parts) != 2:
                raise ValueError(text)
            return tuple(parts)
        if kind is int:
            v = float(text)
            if v != int(v):
                raise ValueError(text)
            return int(v)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}", key=key) from None


def _read(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    out = {}
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]", key=name)
        keys = _SECTIONS[name]
        sec = {}
        for key, raw in cp.items(name):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{name}]", key=key)
            if raw.strip() == "":
                continue
            sec[key] = _convert(name, key, keys[key], raw)
        out[name] = sec
    return out


def parse_document(text: str) -> RunDocument:
    data = _read(text)
    case = dict(data.get("case", {}))
    params = dict(data.get("params", {}))
    mesh = dict(data.get("mesh", {}))
    output = dict(data.get("output", {}))
    for key in ("kind", "t_end"):
        if key not in case:
            raise ConfigError(f"missing required key {key!r} in [case]", key=key)
    if "beta" not in params:
        raise ConfigError("missing required key 'beta' in [params]", key="beta")
    if (case["kind"] == RAYLEIGH_TAYLOR and "sigma" not in params
            and case.get("phi_s") is not None and case.get("k") is not None):
        g = params.get("gravity", (0.0, 0.0))[1]
        params["sigma"] = rti_sigma(case["phi_s"], case["k"], g,
                                    params.get("rho1", 1.0), params.get("rho2", 1.0))
    p = Params(**params)
    scheme = Scheme(**{k: case.pop(k) for k in _SCHEME_KEYS if k in case})
    config = CaseConfig(params=p, scheme=scheme, mesh=MeshSpec(**mesh), **case)
    out = OutputSpec(**output)
    if out.snapshot_every is not None and not out.snapshot_every > 0:
        raise ConfigError("snapshot_every must be positive", key="snapshot_every")
    return RunDocument(config, out)


def parse_config(text: str) -> CaseConfig:
    """Fully resolved case configuration from an INI document."""
    return parse_document(text).config


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(float(x)) for x in v)
    return str(v)


def render_config(config: CaseConfig, output: OutputSpec | None = None) -> str:
    """INI text that parses back to an equal configuration."""
    lines = ["[case]"]
    for key in _CASE_KEYS:
        if key in _SCHEME_KEYS:
            val = getattr(config.scheme, key)
        else:
            val = getattr(config, key)
        if val is not None:
            lines.append(f"{key} = {_fmt(val)}")
    lines += ["", "[params]"]
    for f in dataclasses.fields(Params):
        lines.append(f"{f.name} = {_fmt(getattr(config.params, f.name))}")
    lines += ["", "[mesh]"]
    for f in dataclasses.fields(MeshSpec):
        val = getattr(config.mesh, f.name)
        if val is not None:
            lines.append(f"{f.name} = {_fmt(val)}")
    if output is not None:
        lines += ["", "[output]"]
        if output.snapshot_every is not None:
            lines.append(f"snapshot_every = {_fmt(output.snapshot_every)}")
        lines.append(f"vtk = {_fmt(output.vtk)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------- VTK
VTK_HEADER = "# vtk DataFile Version 3.0"
_VTK_TYPES = {3: 5, 4: 9}
VTK_FIELDS = ("p", "u", "v", "psi", "rho", "kappa")


def _g(x) -> str:
    return f"{float(x):.17g}"


def vtk_document(snapshot: FieldSnapshot, mesh: Mesh, params: Params, kappa=None) -> str:
    U = snapshot.U
    rho, _ = mix_properties(U[:, 3], params, check=False)
    if kappa is None:
        kappa = (snapshot.curvature.kappa if snapshot.curvature is not None
                 else np.zeros(mesh.n_cells))
    fields = {
        "p": params.beta * U[:, 0], "u": U[:, 1] / rho, "v": U[:, 2] / rho,
        "psi": U[:, 3], "rho": rho, "kappa": np.asarray(kappa, dtype=float),
    }
    out = [VTK_HEADER, f"wc2p snapshot t={_g(snapshot.t)} step={snapshot.step}", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {len(mesh.vertices)} double"]
    out += [f"{_g(x)} {_g(y)} 0" for x, y in mesh.vertices]
    cells = mesh.cell_vertices
    total = sum(len(c) + 1 for c in cells)
    out.append(f"CELLS {len(cells)} {total}")
    out += [f"{len(c)} " + " ".join(map(str, c)) for c in cells]
    out.append(f"CELL_TYPES {len(cells)}")
    for c in cells:
        if len(c) not in _VTK_TYPES:
            raise ValueError(f"cells with {len(c)} vertices have no VTK type here")
        out.append(str(_VTK_TYPES[len(c)]))
    out.append(f"CELL_DATA {len(cells)}")
    for name in VTK_FIELDS:
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [_g(v) for v in fields[name]]
    return "\n".join(out) + "\n"


def write_vtk_snapshot(snapshot: FieldSnapshot, mesh: Mesh, path, params: Params,
                       kappa=None) -> Path:
    path = Path(path)
    text = vtk_document(snapshot, mesh, params, kappa)
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc
    return path


def read_vtk(path) -> dict:
    """Parse and check a legacy ASCII unstructured-grid file written above."""
    with open(path, encoding="ascii") as fh:
        lines = fh.read().split("\n")
    if lines[0] != VTK_HEADER or lines[2] != "ASCII" or lines[3] != "DATASET UNSTRUCTURED_GRID":
        raise ValueError(f"{path}: not a legacy ASCII unstructured grid")
    i = 4
    tok = lines[i].split()
    npts = int(tok[1])
    pts = np.array([[float(v) for v in lines[i + 1 + k].split()] for k in range(npts)])
    i += 1 + npts
    tok = lines[i].split()
    ncell, total = int(tok[1]), int(tok[2])
    cells = [[int(v) for v in lines[i + 1 + k].split()] for k in range(ncell)]
    if sum(len(c) for c in cells) != total or any(c[0] != len(c) - 1 for c in cells):
        raise ValueError(f"{path}: CELLS block inconsistent")
    if any(max(c[1:]) >= npts for c in cells):
        raise ValueError(f"{path}: cell references missing point")
    i += 1 + ncell
    if lines[i] != f"CELL_TYPES {ncell}":
        raise ValueError(f"{path}: CELL_TYPES block missing")
    types = [int(lines[i + 1 + k]) for k in range(ncell)]
    i += 1 + ncell
    if lines[i] != f"CELL_DATA {ncell}":
        raise ValueError(f"{path}: CELL_DATA block missing")
    i += 1
    data = {}
    while i < len(lines) and lines[i]:
        tok = lines[i].split()
        if tok[0] != "SCALARS" or lines[i + 1] != "LOOKUP_TABLE default":
            raise ValueError(f"{path}: malformed SCALARS block at line {i + 1}")
        data[tok[1]] = np.array([float(v) for v in lines[i + 2:i + 2 + ncell]])
        i += 2 + ncell
    return {"points": pts, "cells": [c[1:] for c in cells], "types": types, "cell_data": data}


# --------------------------------------------------------------- time series
def write_timeseries(series: TimeSeries, path) -> Path:
    path = Path(path)
    rows = ["t,value"] + [f"{_g(t)},{_g(v)}" for t, v in zip(series.t, series.values)]
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(rows) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write time series {path}: {exc}") from exc
    return path


def read_timeseries(path, name: str | None = None) -> TimeSeries:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "t,value":
        raise ValueError(f"{path}: missing 't,value' header")
    ts = TimeSeries(name or Path(path).stem)
    for row in lines[1:]:
        t, v = row.split(",")
        ts.append(float(t), float(v))
    return ts


# ------------------------------------------------------------------ manifest
def threads_setting() -> int:
    """WC2P_THREADS (0 = serial reference mode); this build always runs serially."""
    raw = os.environ.get("WC2P_THREADS", "0")
    try:
        return max(0, int(raw))
    except ValueError:
        raise ConfigError(f"WC2P_THREADS must be an integer, got {raw!r}",
                          key="WC2P_THREADS") from None


def mesh_provenance(config: CaseConfig) -> dict:
    spec = dataclasses.asdict(config.mesh)
    if config.mesh.kind == "file" and config.mesh.path:
        with open(config.mesh.path, "rb") as fh:
            spec["sha256"] = hashlib.sha256(fh.read()).hexdigest()
    return spec


def write_manifest(path, config: CaseConfig, output: OutputSpec, diagnostics: dict,
                   metrics: dict, files: list) -> Path:
    doc = {
        "code_version": __version__,
        "config": render_config(config, output),
        "mesh": mesh_provenance(config),
        "threads": threads_setting(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "diagnostics": diagnostics,
        "metrics": metrics,
        "files": [str(f) for f in files],
    }
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)
