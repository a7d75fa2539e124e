"""``pressrec`` command line.

Exit codes: 0 success, 2 invalid config or missing input, 3 solver failure.
Failures print a JSON error object on stderr and, when an output location
is known, also write it to ``error.json`` there.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .errors import ConfigError, PressrecError
from .fields import CartesianGrid2, ScalarSamples
from .meshkit import cartesian_cell_mesh, delaunay_triangulate, quality_histogram
from .metrics import align_gauge, error_map, relative_mae, transfer_function
from .pipeline import (RUN_SCHEMA, SWEEP_SCHEMA, generate, resolve_config, resolve_sweep_config,
                       run_pipeline, run_sweep, write_mae_table, write_spectrum, write_sweep)

EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _global_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="base seed (overrides config)")
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (falls back to PRESSREC_THREADS, then 1)")
    return p


def build_parser():
    g = _global_flags()
    ap = argparse.ArgumentParser(prog="pressrec", description="Pressure reconstruction from gradient data.")
    ap.add_argument("--version", action="version", version=f"pressrec {__version__}")
    ap.add_argument("--print-schema", choices=["run", "sweep"], help="print a config JSON schema and exit")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("gen", parents=[g], help="generate a synthetic Taylor-Green case")
    p.add_argument("--case", default="taylor-green", choices=["taylor-green"])
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--mesh", dest="mesh_kind", choices=["cartesian", "perturbed", "random"])
    p.add_argument("--periodic", action="store_true", default=None)
    p.add_argument("--noise", type=float)
    p.add_argument("--source", choices=["analytic", "momentum"])
    for k in ("U", "k", "nu", "rho", "t", "dt"):
        p.add_argument(f"--{k}", type=float)

    p = sub.add_parser("mesh", parents=[g], help="build a cell mesh from points")
    p.add_argument("--points", required=True)
    p.add_argument("--quality", help="write an aspect-ratio histogram CSV here")

    p = sub.add_parser("reconstruct", parents=[g], help="reconstruct pressure with one or more methods")
    p.add_argument("--config")
    p.add_argument("--method", choices=["osmodi", "gfi", "siren"])
    p.add_argument("--mesh")
    p.add_argument("--source")
    p.add_argument("--truth")
    p.add_argument("--report")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--jacobi", action="store_true", default=None)
    p.add_argument("--arch")
    p.add_argument("--omega0", type=float)
    p.add_argument("--omega-c", type=float)
    p.add_argument("--omega-hidden", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--eval-points")
    p.add_argument("--spectra", action="store_true", default=None)
    p.add_argument("--heatmaps", action="store_true", default=None)

    p = sub.add_parser("sweep", parents=[g], help="noise-level sweep")
    p.add_argument("--config", required=True)

    p = sub.add_parser("spectrum", parents=[g], help="radial spectra and transfer function")
    p.add_argument("--recon", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--grid", help="grid JSON, if the CSVs have no sidecar")

    p = sub.add_parser("report", parents=[g], help="MAE table from reports, or an error map")
    p.add_argument("--inputs", nargs="*", default=[], help="report JSON files")
    p.add_argument("--recon")
    p.add_argument("--truth")
    p.add_argument("--heatmap", help="write the error map as PGM here (grid fields only)")
    return ap


def _load_config(path):
    if path is None:
        return {}
    try:
        return io.read_json(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


def _set(d, key, value):
    if value is not None:
        d[key] = value


# --- subcommands ------------------------------------------------------------

def cmd_gen(a):
    raw = _load_config(a.config)
    raw.setdefault("case", {"kind": a.case})
    raw.setdefault("mesh", {})
    raw.setdefault("methods", [{"name": "osmodi"}])
    case, mesh = raw["case"], raw["mesh"]
    for k in ("U", "k", "nu", "rho", "t", "dt", "noise", "source"):
        _set(case, k, getattr(a, k))
    if case.get("noise", 0) > 0:
        case.setdefault("source", "momentum")
    _set(mesh, "n", a.n)
    _set(mesh, "L", a.L)
    _set(mesh, "kind", a.mesh_kind)
    _set(mesh, "periodic", a.periodic)
    _set(raw, "seed", a.seed)
    cfg = resolve_config(raw)
    generate(cfg, a.out or cfg["out"])
    return 0


def cmd_mesh(a):
    if not Path(a.points).is_file():
        raise ConfigError(f"points file not found: {a.points}")
    pts, grid = io.load_points(a.points)
    mesh = cartesian_cell_mesh(grid) if grid is not None else delaunay_triangulate(pts)
    out = a.out or "mesh.json"
    io.save_mesh(out, mesh)
    if a.quality:
        if mesh.kind != "tri":
            raise ConfigError("--quality needs a triangle mesh")
        edges, counts = quality_histogram(mesh)
        with open(a.quality, "w") as fh:
            fh.write("lo,hi,count\n")
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                fh.write(f"{io._fmt(lo)},{io._fmt(hi)},{int(c)}\n")
    return 0


def cmd_reconstruct(a):
    raw = _load_config(a.config)
    if a.method is not None:
        m = next((x for x in raw.get("methods", []) if x.get("name") == a.method), {"name": a.method})
        raw["methods"] = [m]
    elif "methods" not in raw:
        raise ConfigError("give --method or a config with methods")
    if a.source is not None:
        raw["case"] = {"kind": "external", "source": a.source,
                       "truth": a.truth, "mesh": a.mesh}
    elif "case" not in raw:
        raise ConfigError("give --source or a config with a case")
    else:
        if a.truth is not None:
            raw["case"]["truth"] = a.truth
        if a.mesh is not None:
            raw["case"]["mesh"] = a.mesh
    flags = {"tol": a.tol, "max_iter": a.max_iter, "jacobi": a.jacobi, "arch": a.arch,
             "omega0": a.omega0, "omega_c": a.omega_c, "omega_hidden": a.omega_hidden,
             "epochs": a.epochs, "lr": a.lr, "eval_points": a.eval_points}
    for m in raw["methods"]:
        allowed = {"osmodi": ("tol", "max_iter", "jacobi"), "gfi": (),
                   "siren": ("arch", "omega0", "omega_c", "omega_hidden", "epochs", "lr", "eval_points")}
        for k in allowed.get(m.get("name"), ()):
            _set(m, k, flags[k])
        if m.get("name") == "siren":
            _set(m, "seed", a.seed)
    _set(raw, "seed", a.seed)
    _set(raw, "spectra", a.spectra)
    _set(raw, "heatmaps", a.heatmaps)
    p_path = None
    if a.out is not None:
        if a.out.endswith(".csv"):
            p_path = a.out
            raw["out"] = str(Path(a.out).parent)
        else:
            raw["out"] = a.out
    cfg = resolve_config(raw)
    reports = run_pipeline(cfg, p_path, a.report, a.threads)
    for r in reports:
        print(json.dumps({"method": r.method, "relative_mae": r.relative_mae}))
    return 0


def cmd_sweep(a):
    raw = _load_config(a.config)
    _set(raw, "seed", a.seed)
    cfg = resolve_sweep_config(raw)
    rows, summary, trend = run_sweep(cfg, a.threads)
    write_sweep(a.out or "sweep.csv", cfg, rows, summary, trend)
    print(json.dumps({"spearman": trend}))
    return 0


def _load_grid_field(path, grid_path):
    if not Path(path).is_file():
        raise ConfigError(f"field file not found: {path}")
    f = io.load_scalar(path)
    if grid_path is not None:
        grid = CartesianGrid2.from_json(io.read_json(grid_path))
        f = ScalarSamples(grid.points(), f.values, grid)
    return f


def cmd_spectrum(a):
    recon = _load_grid_field(a.recon, a.grid)
    truth = _load_grid_field(a.truth, a.grid)
    if recon.grid is None or truth.grid is None:
        raise ConfigError("spectrum needs grid fields (sidecar .grid.json or --grid)")
    write_spectrum(a.out or "spectrum.csv", transfer_function(recon, truth))
    return 0


def cmd_report(a):
    rows = []
    for path in a.inputs:
        if not Path(path).is_file():
            raise ConfigError(f"report file not found: {path}")
        d = io.read_json(path)
        rows.append({"method": d["method"], "relative_mae": d["relative_mae"],
                     "gauge_offset": d["gauge_offset"], "n_points": d["n_points"]})
    if a.recon or a.truth:
        if not (a.recon and a.truth):
            raise ConfigError("--recon and --truth go together")
        recon, truth = _load_grid_field(a.recon, None), _load_grid_field(a.truth, None)
        aligned, offset = align_gauge(recon, truth)
        rows.append({"method": Path(a.recon).stem, "relative_mae": relative_mae(aligned, truth),
                     "gauge_offset": offset, "n_points": len(recon)})
        if a.heatmap:
            if recon.grid is None:
                raise ConfigError("--heatmap needs a grid field")
            io.write_pgm(a.heatmap, error_map(aligned, truth).reshape(recon.grid.shape))
    if not rows:
        raise ConfigError("nothing to report: give --inputs or --recon/--truth")
    write_mae_table(a.out or "mae_table.csv", rows)
    return 0


COMMANDS = {"gen": cmd_gen, "mesh": cmd_mesh, "reconstruct": cmd_reconstruct, "sweep": cmd_sweep,
            "spectrum": cmd_spectrum, "report": cmd_report}


def _fail(code, exc, out):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("iteration", "rank", "n", "asymmetry", "pairs", "index", "point"):
        if hasattr(exc, attr):
            err[attr] = getattr(exc, attr)
    text = json.dumps(err, default=lambda o: o.tolist() if isinstance(o, np.ndarray) else str(o))
    print(text, file=sys.stderr)
    if out:
        d = Path(out)
        d = d.parent if d.suffix else d
        try:
            d.mkdir(parents=True, exist_ok=True)
            (d / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None):
    ap = build_parser()
    a = ap.parse_args(argv)
    if a.print_schema:
        print(json.dumps(RUN_SCHEMA if a.print_schema == "run" else SWEEP_SCHEMA, indent=2))
        return 0
    if a.command is None:
        ap.print_help()
        return EXIT_CONFIG
    out = getattr(a, "out", None)
    try:
        return COMMANDS[a.command](a)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc, out)
    except PressrecError as exc:
        return _fail(EXIT_SOLVER, exc, out)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_SOLVER, exc, out)


if __name__ == "__main__":
    sys.exit(main())
