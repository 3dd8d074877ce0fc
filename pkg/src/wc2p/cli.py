"""Command-line driver: ``wc2p {run, convergence, sweep, compare, validate-mesh}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import cases
from .errors import ConfigError, MeshError, WC2PError
from .io import (parse_document, threads_setting, write_manifest, write_timeseries,
                 write_vtk_snapshot)
from .mesh import import_mesh, validate_mesh
from .stepper import CSF_SOURCE, PATH_CONSERVATIVE, run_simulation

log = logging.getLogger("wc2p")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

PRIMARY_METRIC = {
    cases.STATIC_DROP: "l2_p",
    cases.LINEAR_SLOSHING: "l2_eta",
    cases.CAPILLARY_WAVE: "l2_amplitude",
    cases.RAYLEIGH_TAYLOR: "growth_rate",
}


def _load(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}", key="config") from None
    return parse_document(text)


def run_case(config, output=None, out_dir=None):
    """Build the mesh, run, and (optionally) write outputs; returns (result, metrics, mesh)."""
    mesh = cases.build_mesh(config)
    every = output.snapshot_every if output is not None else None
    files = []
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    def dump(snap):
        if out and (output is None or output.vtk):
            files.append(write_vtk_snapshot(snap, mesh, out / f"snapshot_{snap.step:07d}.vtk",
                                            config.params))

    try:
        result = run_simulation(config, mesh, snapshot_every=every, on_snapshot=dump)
    except WC2PError as exc:
        partial = getattr(exc, "partial", None)
        if out and partial is not None:
            for name, s in partial.series.items():
                write_timeseries(s, out / f"{name}.csv")
            dump(partial.final)
        raise
    metrics = cases.error_metrics(result, config, mesh)
    if out:
        dump(result.final)
        for name, s in result.series.items():
            files.append(write_timeseries(s, out / f"{name}.csv"))
        write_manifest(out / "manifest.json", config, output, result.diagnostics, metrics, files)
    return result, metrics, mesh


def _scaled(config, n):
    spec = config.mesh
    if spec.kind != "cartesian":
        raise ConfigError("refinement ladders need a cartesian mesh", key="mesh")
    ratio = spec.ny / spec.nx
    return config.with_mesh(nx=int(n), ny=int(round(n * ratio)))


def ladder(config, levels, metric=None, echo=print):
    metric = metric or PRIMARY_METRIC[config.kind]
    rows = []
    for n in levels:
        cfg = _scaled(config, n)
        _, m, mesh = run_case(cfg)
        rows.append((mesh.h, m[metric]))
        echo(f"  n={n:<5d} h={mesh.h:.6g}  {metric}={m[metric]:.6g}")
    return rows


def print_order_table(rows, title, echo=print):
    echo(title)
    echo(f"{'h':>12s} {'error':>14s} {'order':>8s}")
    for k, (h, e) in enumerate(rows):
        o = "-" if k == 0 else f"{np.log(rows[k - 1][1] / e) / np.log(rows[k - 1][0] / h):.3f}"
        echo(f"{h:12.6g} {e:14.6g} {o:>8s}")
    if len(rows) >= 2:
        eff = cases.effective_order([e for _, e in rows], [h for h, _ in rows])
        echo(f"effective order: {eff:.3f}")
        return eff
    return None


def _levels(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad level list {text!r}", key="levels") from None
    if not vals:
        raise ConfigError("empty level list", key="levels")
    return vals


def cmd_run(args):
    doc = _load(args.config)
    _, metrics, _ = run_case(doc.config, doc.output, args.out)
    for k, v in metrics.items():
        print(f"{k} = {v}")
    return EXIT_OK


def cmd_convergence(args):
    doc = _load(args.config)
    rows = ladder(doc.config, _levels(args.levels))
    print_order_table(rows, f"convergence: {doc.config.kind} ({doc.config.scheme.surface_tension})")
    return EXIT_OK


def cmd_compare(args):
    doc = _load(args.config)
    levels = _levels(args.levels)
    orders = {}
    for mode in (PATH_CONSERVATIVE, CSF_SOURCE):
        cfg = doc.config.with_scheme(surface_tension=mode)
        rows = ladder(cfg, levels)
        orders[mode] = print_order_table(rows, f"mode: {mode}")
    if all(v is not None for v in orders.values()):
        print(f"order difference (path_conservative - csf_source): "
              f"{orders[PATH_CONSERVATIVE] - orders[CSF_SOURCE]:.3f}")
    return EXIT_OK


def cmd_sweep(args):
    doc = _load(args.config)
    cfg = doc.config
    if cfg.kind != cases.RAYLEIGH_TAYLOR:
        raise ConfigError("sweep applies to rayleigh_taylor cases", key="kind")
    try:
        values = [float(v) for v in args.phi_s.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad phi_s list {args.phi_s!r}", key="phi_s") from None
    print(f"{'phi_s':>8s} {'n_fit':>10s} {'n_theory':>10s} {'R2':>8s}")
    for phi in values:
        p = cfg.params
        sigma = cases.rti_sigma(phi, cfg.k, p.gravity[1], p.rho1, p.rho2)
        c = cfg.replace(phi_s=phi, params=dataclasses.replace(p, sigma=sigma))
        _, m, _ = run_case(c)
        th = m["theory"]
        th_s = th if isinstance(th, str) else f"{th:.4f}"
        print(f"{phi:8.3f} {m['growth_rate']:10.4f} {th_s:>10s} {m['fit_r2']:8.4f}")
    return EXIT_OK


def cmd_validate_mesh(args):
    if args.mesh:
        try:
            text = Path(args.mesh).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read mesh {args.mesh}: {exc}", key="mesh") from None
        mesh = import_mesh(text)
    elif args.config:
        mesh = cases.build_mesh(_load(args.config).config)
    else:
        raise ConfigError("validate-mesh needs --mesh or --config", key="mesh")
    report = validate_mesh(mesh)
    print(f"cells: {mesh.n_cells}  faces: {mesh.n_faces}  h: {mesh.h:.6g}")
    print(report)
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser():
    ap = argparse.ArgumentParser(prog="wc2p", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one case")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("convergence", help="mesh refinement ladder")
    p.add_argument("--config", required=True)
    p.add_argument("--levels", required=True, help="comma-separated nx values")
    p.set_defaults(func=cmd_convergence)
    p = sub.add_parser("sweep", help="Rayleigh-Taylor phi_s study")
    p.add_argument("--config", required=True)
    p.add_argument("--phi-s", dest="phi_s", required=True)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("compare", help="path-conservative vs CSF-source ladders")
    p.add_argument("--config", required=True)
    p.add_argument("--levels", default="32,64,128")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("validate-mesh", help="check mesh invariants")
    p.add_argument("--mesh")
    p.add_argument("--config")
    p.set_defaults(func=cmd_validate_mesh)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        threads = threads_setting()
        if threads > 1:
            log.info("WC2P_THREADS=%d requested; running the serial reference path", threads)
        return args.func(args)
    except (ConfigError, MeshError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WC2PError as exc:
        print(f"solver aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


cli = main

if __name__ == "__main__":
    sys.exit(main())
