"""Config-driven generate, mesh, reconstruct and analyse runs.

A run config is a JSON object validated against ``RUN_SCHEMA``. Resolution
fills every default in, so the resolved config written into each report is
the complete recipe for reproducing it.
"""
from __future__ import annotations

import copy
import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import io
from .errors import ConfigError, PressrecError
from .fields import CartesianGrid2, PointSet2, ScalarSamples, VectorSamples, bilinear_resample
from .gfi import reconstruct_gfi
from .meshkit import CellMesh, cartesian_cell_mesh, delaunay_triangulate, vertex_to_cell
from .metrics import (ReconstructionReport, align_gauge, error_map, noise_sweep, relative_mae,
                      sweep_trend, transfer_function)
from .osmodi import CgOptions, reconstruct_osmodi
from .siren import SirenConfig, TrainConfig, evaluate, omega0_heuristic, train
from .synthlab import (NoiseSpec, TaylorGreenParams, add_noise, momentum_source, seed_perturbed_grid,
                       seed_uniform_random, taylor_green_eval, taylor_green_gradient, taylor_green_pressure)

METHODS = ("osmodi", "gfi", "siren")

_num = {"type": "number"}
_seed = {"type": ["integer", "null"], "minimum": 0}

METHOD_SCHEMA = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"enum": list(METHODS)},
        # osmodi
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": ["integer", "null"], "minimum": 1},
        "jacobi": {"type": "boolean"},
        # siren
        "arch": {"type": "string", "pattern": r"^[0-9]+x[0-9]+$"},
        "omega0": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "omega_c": {"type": "number", "exclusiveMinimum": 0},
        "omega_hidden": {"type": "number", "exclusiveMinimum": 0},
        "epochs": {"type": "integer", "minimum": 1},
        "lr": {"type": "number", "exclusiveMinimum": 0},
        "seed": _seed,
        "init": {"enum": ["omega", "literal"]},
        "eval_points": {"type": ["string", "null"]},
    },
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "pressrec run config",
    "type": "object",
    "required": ["case", "methods"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "case": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"const": "taylor-green"},
                        "U": _num, "k": _num, "nu": _num, "rho": _num, "t": _num,
                        "dt": {"type": "number", "exclusiveMinimum": 0},
                        "source": {"enum": ["analytic", "momentum"]},
                        "noise": {"type": "number", "minimum": 0},
                        "noise_seed": _seed,
                    },
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "required": ["kind", "source"],
                    "properties": {
                        "kind": {"const": "external"},
                        "source": {"type": "string"},
                        "truth": {"type": ["string", "null"]},
                        "mesh": {"type": ["string", "null"]},
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "mesh": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["cartesian", "perturbed", "random"]},
                "n": {"type": "integer", "minimum": 3},
                "L": {"type": "number", "exclusiveMinimum": 0},
                "periodic": {"type": "boolean"},
                "eps_std": {"type": "number", "minimum": 0},
                "seed": _seed,
            },
            "additionalProperties": False,
        },
        "methods": {"type": "array", "minItems": 1, "items": METHOD_SCHEMA},
        "spectra": {"type": "boolean"},
        "heatmaps": {"type": "boolean"},
    },
    "additionalProperties": False,
}

SWEEP_SCHEMA = {
    "type": "object",
    "required": ["case", "methods"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "case": RUN_SCHEMA["properties"]["case"]["oneOf"][0],
        "mesh": RUN_SCHEMA["properties"]["mesh"],
        "methods": RUN_SCHEMA["properties"]["methods"],
        "levels": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    },
    "additionalProperties": False,
}

TG_DEFAULTS = {"U": 1.0, "k": 1.0, "nu": 0.0, "rho": 1.0, "t": 0.0, "dt": 0.1,
               "source": "analytic", "noise": 0.0, "noise_seed": None}
MESH_DEFAULTS = {"kind": "cartesian", "n": 100, "L": 2 * math.pi, "periodic": False,
                 "eps_std": 4e-4, "seed": None}
METHOD_DEFAULTS = {
    "osmodi": {"tol": 1e-10, "max_iter": None, "jacobi": False},
    "gfi": {},
    "siren": {"arch": "1x64", "omega0": None, "omega_c": 2.0, "omega_hidden": 30.0,
              "epochs": 2000, "lr": 3e-5, "seed": None, "init": "omega", "eval_points": None},
}
DEFAULT_SWEEP_LEVELS = [0.0, 0.02, 0.04, 0.06, 0.08, 0.10]


def _validate(raw, schema, what):
    try:
        jsonschema.validate(raw, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{what} invalid at {where}: {exc.message}") from None


def _resolve_common(cfg):
    seed = cfg.setdefault("seed", 0)
    case = cfg["case"]
    if case["kind"] == "taylor-green":
        for k, v in TG_DEFAULTS.items():
            case.setdefault(k, v)
        if case["noise_seed"] is None:
            case["noise_seed"] = seed
        if case["noise"] > 0 and case["source"] != "momentum":
            raise ConfigError("case.noise > 0 perturbs velocity and needs case.source = 'momentum'")
    mesh = cfg.setdefault("mesh", {})
    for k, v in MESH_DEFAULTS.items():
        mesh.setdefault(k, v)
    if mesh["seed"] is None:
        mesh["seed"] = seed
    if mesh["periodic"] and mesh["kind"] != "cartesian":
        raise ConfigError("mesh.periodic is only meaningful for a cartesian mesh")
    if case["kind"] == "taylor-green" and case["source"] == "momentum" and mesh["kind"] != "cartesian":
        raise ConfigError("case.source = 'momentum' needs a cartesian mesh")
    names = [m["name"] for m in cfg["methods"]]
    if len(set(names)) != len(names):
        raise ConfigError(f"methods listed more than once: {names}")
    for m in cfg["methods"]:
        for k, v in METHOD_DEFAULTS[m["name"]].items():
            m.setdefault(k, v)
        extra = set(m) - set(METHOD_DEFAULTS[m["name"]]) - {"name"}
        if extra:
            raise ConfigError(f"method {m['name']} does not take {sorted(extra)}")
        if m["name"] == "siren" and m["seed"] is None:
            m["seed"] = seed
    return cfg


def _check_file(path, what):
    if path is not None and not Path(path).is_file():
        raise ConfigError(f"{what} file not found: {path}")


def resolve_config(raw) -> dict:
    """Validate a run config and return a copy with every default filled in."""
    _validate(raw, RUN_SCHEMA, "run config")
    cfg = _resolve_common(copy.deepcopy(raw))
    cfg.setdefault("out", "out")
    cfg.setdefault("spectra", False)
    cfg.setdefault("heatmaps", False)
    case = cfg["case"]
    if case["kind"] == "external":
        case.setdefault("truth", None)
        case.setdefault("mesh", None)
        _check_file(case["source"], "source")
        _check_file(case["truth"], "truth")
        _check_file(case["mesh"], "mesh")
    for m in cfg["methods"]:
        if m["name"] == "siren":
            _check_file(m["eval_points"], "eval_points")
    return cfg


def resolve_sweep_config(raw) -> dict:
    _validate(raw, SWEEP_SCHEMA, "sweep config")
    cfg = copy.deepcopy(raw)
    cfg["case"].setdefault("source", "momentum")
    cfg["case"]["noise"] = 0.0
    cfg.setdefault("levels", list(DEFAULT_SWEEP_LEVELS))
    cfg.setdefault("seeds", [0, 1, 2])
    return _resolve_common(cfg)


# --- cases ------------------------------------------------------------------

@dataclass(eq=False)
class Case:
    """Gradient data, the cells they live on and (optionally) the truth.

    ``points``/``point_source`` are the raw samples used to train a SIREN;
    ``cell_source`` holds the same data collocated on the mesh cells used by
    the mesh-based solvers. ``truth`` returns the true pressure at arbitrary
    locations, or None when unknown.
    """

    points: PointSet2
    point_source: VectorSamples
    grid: CartesianGrid2 = None
    mesh_factory: object = None
    cell_gradient: object = None  # callable(mesh) -> (n_cells, 2)
    truth_at: object = None  # callable(coords) -> values, or None

    @cached_property
    def mesh(self) -> CellMesh:
        return self.mesh_factory()

    @cached_property
    def cell_source(self) -> VectorSamples:
        g = self.cell_gradient(self.mesh)
        return VectorSamples(PointSet2(self.mesh.centroids, np.all(np.isfinite(g), axis=1)), g)

    def truth(self, coords):
        return None if self.truth_at is None else self.truth_at(coords)


def _tg_layout(mesh_cfg):
    n, L = mesh_cfg["n"], mesh_cfg["L"]
    kind = mesh_cfg["kind"]
    if kind == "cartesian":
        h = L / n if mesh_cfg["periodic"] else L / (n - 1)
        grid = CartesianGrid2(n, n, h, (-L / 2, -L / 2), mesh_cfg["periodic"])
        return grid.points(), grid
    if kind == "perturbed":
        pts = seed_perturbed_grid(n, (-L / 2, L / 2, -L / 2, L / 2), mesh_cfg["eps_std"], mesh_cfg["seed"])
        return pts, None
    return seed_uniform_random(n * n, L, mesh_cfg["seed"]), None


def _mesh_factory(points, grid):
    if grid is not None:
        return lambda: cartesian_cell_mesh(grid)
    return lambda: delaunay_triangulate(points)


def _vertex_values_to_cells(mesh, values):
    v = np.asarray(values, float)
    if mesh.kind == "quad":
        return v
    if mesh.vertex_ids is not None:
        v = v[mesh.vertex_ids]
    return vertex_to_cell(mesh, v)


def build_taylor_green_case(cfg) -> Case:
    c, m = cfg["case"], cfg["mesh"]
    params = TaylorGreenParams(c["U"], c["k"], c["nu"], c["rho"])
    points, grid = _tg_layout(m)
    t = c["t"]
    if c["source"] == "analytic":
        src = VectorSamples(points, taylor_green_gradient(params, points.coords, t), grid)

        def cell_gradient(mesh):
            g = np.array(src.values)
            return np.column_stack([_vertex_values_to_cells(mesh, g[:, k]) for k in range(2)])
    else:
        snaps = []
        for i, ti in enumerate((t - c["dt"], t, t + c["dt"])):
            vel = taylor_green_eval(params, points, ti, grid)["velocity"]
            snaps.append(add_noise(vel, NoiseSpec(c["noise"], 3 * c["noise_seed"] + i)))
        src = momentum_source(*snaps, c["dt"], params.rho, params.mu)

        def cell_gradient(mesh):
            return np.array(src.values)

    return Case(points, src, grid, _mesh_factory(points, grid), cell_gradient,
                lambda xy: taylor_green_pressure(params, xy, t))


def build_external_case(cfg) -> Case:
    c = cfg["case"]
    try:
        src = io.load_vector(c["source"])
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot read source {c['source']}: {exc}") from None
    points, grid = src.points, src.grid
    if c["mesh"] is not None:
        mesh_path = c["mesh"]
        factory = lambda: io.load_mesh(mesh_path)  # noqa: E731
    else:
        factory = _mesh_factory(points, grid)

    def cell_gradient(mesh):
        g = np.array(src.values[:, :2])
        g[~src.points.valid] = np.nan
        if len(g) == mesh.n_cells and (mesh.kind == "quad" or c["mesh"] is not None):
            return g
        return np.column_stack([_vertex_values_to_cells(mesh, g[:, k]) for k in range(2)])

    truth_at = None
    if c["truth"] is not None:
        truth = io.load_scalar(c["truth"])

        def truth_at(xy):
            xy = np.asarray(xy, float)
            if xy.shape == truth.points.coords.shape and np.array_equal(xy, truth.points.coords):
                return np.array(truth.values)
            if truth.grid is not None:
                return bilinear_resample(truth, PointSet2(xy)).values
            mesh = case.mesh
            if (len(truth) == len(points) and mesh.kind == "tri" and xy.shape == mesh.centroids.shape
                    and np.array_equal(xy, mesh.centroids)):
                # same vertex-to-cell collocation as the source
                return _vertex_values_to_cells(mesh, np.where(truth.points.valid, truth.values, np.nan))
            raise ConfigError("truth samples are not at the evaluation points and carry no grid")

    case = Case(points, src, grid, factory, cell_gradient, truth_at)
    return case


def build_case(cfg) -> Case:
    if cfg["case"]["kind"] == "taylor-green":
        return build_taylor_green_case(cfg)
    return build_external_case(cfg)


# --- methods ----------------------------------------------------------------

def siren_config(mcfg, points: PointSet2):
    X = points.coords[points.valid]
    omega0 = mcfg["omega0"]
    if omega0 is None:
        omega0 = omega0_heuristic(float(np.ptp(X[:, 0])), float(np.ptp(X[:, 1])), mcfg["omega_c"])
    return SirenConfig.from_arch(mcfg["arch"], omega0, mcfg["omega_hidden"], mcfg["seed"], mcfg["init"])


def run_method(case: Case, mcfg) -> tuple:
    """Reconstruct with one method; returns ``(report, extras)``.

    The report pressure is gauge-aligned to the truth when it is known.
    """
    name = mcfg["name"]
    extras = {}
    if name == "osmodi":
        opts = CgOptions(mcfg["tol"], mcfg["max_iter"], mcfg["jacobi"])
        rep = reconstruct_osmodi(case.mesh, case.cell_source, opts)
    elif name == "gfi":
        rep = reconstruct_gfi(case.mesh, case.cell_source)
        rep.diagnostics.pop("boundary_pressure", None)
    else:
        t0 = time.perf_counter()
        scfg = siren_config(mcfg, case.points)
        model = train(scfg, TrainConfig(mcfg["lr"], mcfg["epochs"]), case.points, case.point_source)
        if mcfg["eval_points"] is not None:
            ev = PointSet2(io.read_field_csv(mcfg["eval_points"])[0])
        elif case.grid is not None:
            ev = case.points
        else:
            ev = PointSet2(case.mesh.centroids)
        phi, outside = evaluate(model, ev)
        vals = np.array(phi.values)
        vals -= vals.mean()
        rep = ReconstructionReport("siren", ScalarSamples(ev, vals), wall_time=time.perf_counter() - t0,
                                   diagnostics={"omega0": scfg.omega0, "arch": scfg.arch,
                                                "initial_loss": model.loss_history[0],
                                                "final_loss": model.loss_history[-1],
                                                "extrapolated": int(outside.sum())})
        extras["model"] = model
        extras["extrapolated"] = outside
    truth = case.truth(rep.pressure.points.coords)
    if truth is not None:
        t = ScalarSamples(rep.pressure.points, truth)
        aligned, offset = align_gauge(rep.pressure, t)
        rep.pressure = aligned
        rep.gauge_offset = offset
        rep.relative_mae = relative_mae(aligned, t)
        extras["truth"] = t
    return rep, extras


# --- artifacts --------------------------------------------------------------

def _report_json(rep: ReconstructionReport, cfg, mcfg):
    return {
        "toolkit_version": __version__,
        "method": rep.method,
        "config": cfg,
        "method_config": mcfg,
        "seeds": _seeds(cfg, mcfg),
        "relative_mae": rep.relative_mae,
        "gauge_offset": rep.gauge_offset,
        "n_points": len(rep.pressure),
        "diagnostics": rep.diagnostics,
        "wall_time": rep.wall_time,
    }


def _seeds(cfg, mcfg=None):
    s = {"run": cfg["seed"], "mesh": cfg["mesh"]["seed"]}
    if cfg["case"]["kind"] == "taylor-green":
        s["noise"] = cfg["case"]["noise_seed"]
    if mcfg is not None and mcfg["name"] == "siren":
        s["siren"] = mcfg["seed"]
    return s


def _field_grid(case, rep):
    """The Cartesian grid a reconstruction lives on, if any."""
    g = case.grid
    if g is not None and len(rep.pressure) == g.size:
        return g
    return None


def write_mae_table(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "relative_mae", "gauge_offset", "n_points"])
        for r in rows:
            w.writerow([r["method"], io._fmt(r["relative_mae"] if r["relative_mae"] is not None else math.nan),
                        io._fmt(r["gauge_offset"]), r["n_points"]])


def write_spectrum(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "truth_power", "recon_power", "ratio", "amplitude_ratio"])
        for r in table.rows():
            w.writerow([int(r["k"])] + [io._fmt(r[c]) for c in ("truth_power", "recon_power", "ratio",
                                                                "amplitude_ratio")])


def _write_method(outdir: Path, case, rep, extras, cfg, mcfg, p_path=None, report_path=None):
    outdir.mkdir(parents=True, exist_ok=True)
    p_path = Path(p_path) if p_path else outdir / "p.csv"
    report_path = Path(report_path) if report_path else outdir / "report.json"
    grid = _field_grid(case, rep)
    vals = np.where(rep.pressure.points.valid, rep.pressure.values, np.nan)
    io.write_field_csv(p_path, rep.pressure.points.coords, vals, grid)
    io.write_json(report_path, _report_json(rep, cfg, mcfg))
    if "model" in extras:
        d = extras["model"].to_json()
        d["resolved_config"] = cfg
        io.write_json(outdir / "model.json", d)
    truth = extras.get("truth")
    if grid is not None and cfg.get("heatmaps"):
        io.write_pgm(outdir / "pressure.pgm", vals.reshape(grid.shape))
        if truth is not None:
            io.write_pgm(outdir / "error.pgm", error_map(rep.pressure, truth).reshape(grid.shape))
    if grid is not None and grid.periodic and truth is not None and cfg.get("spectra"):
        tf = transfer_function(ScalarSamples(grid.points(), vals, grid),
                               ScalarSamples(grid.points(), truth.values, grid))
        write_spectrum(outdir / "spectrum.csv", tf)


def resolve_threads(threads=None):
    if threads is None:
        env = os.environ.get("PRESSREC_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"PRESSREC_THREADS must be an integer, got {env!r}") from None
    threads = threads or 1
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


def run_pipeline(cfg, p_path=None, report_path=None, threads=None):
    """Run every configured method on one case and write its artifacts.

    ``cfg`` must already be resolved. With one method the outputs are
    ``p.csv`` and ``report.json`` in ``cfg['out']``; with several, each method
    gets a subdirectory and ``mae_table.csv`` collects the errors.
    Returns the list of reports.
    """
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    case = build_case(cfg)
    methods = cfg["methods"]
    if any(m["name"] != "siren" or m["eval_points"] is None for m in methods) and case.grid is None:
        case.mesh  # build once, before any fan-out
    n = resolve_threads(threads)
    if n > 1 and len(methods) > 1:
        with ThreadPoolExecutor(n) as ex:
            results = list(ex.map(lambda m: run_method(case, m), methods))
    else:
        results = [run_method(case, m) for m in methods]
    single = len(methods) == 1
    rows = []
    for mcfg, (rep, extras) in zip(methods, results):
        d = out if single else out / mcfg["name"]
        _write_method(d, case, rep, extras, cfg, mcfg,
                      p_path if single else None, report_path if single else None)
        rows.append({"method": rep.method, "relative_mae": rep.relative_mae,
                     "gauge_offset": rep.gauge_offset, "n_points": len(rep.pressure)})
    write_mae_table(out / "mae_table.csv", rows)
    return [r for r, _ in results]


# --- generation and sweeps ---------------------------------------------------

def generate(cfg, out):
    """Write velocity, source, truth and meta files for a Taylor-Green case."""
    c, m = cfg["case"], cfg["mesh"]
    if c["kind"] != "taylor-green":
        raise ConfigError("gen only supports the taylor-green case")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    case = build_taylor_green_case(cfg)
    params = TaylorGreenParams(c["U"], c["k"], c["nu"], c["rho"])
    vel = taylor_green_eval(params, case.points, c["t"], case.grid)["velocity"]
    if c["noise"] > 0:
        vel = add_noise(vel, NoiseSpec(c["noise"], 3 * c["noise_seed"] + 1))
    xy = case.points.coords
    io.write_field_csv(out / "velocity.csv", xy, vel.values, case.grid)
    io.write_field_csv(out / "source.csv", xy, case.point_source.values, case.grid)
    io.write_field_csv(out / "pressure_truth.csv", xy, case.truth(xy), case.grid)
    io.write_json(out / "meta.json", {"toolkit_version": __version__, "config": cfg,
                                      "seeds": _seeds(cfg), "n_points": len(xy),
                                      "grid": None if case.grid is None else case.grid.to_json()})


def run_sweep(cfg, threads=None):
    """Noise sweep over ``levels`` x ``seeds`` for every configured method."""
    methods = {m["name"]: m for m in cfg["methods"]}

    def run_case(name, level, seed):
        c = copy.deepcopy(cfg)
        c["case"].update(noise=level, noise_seed=seed, source="momentum")
        rep, _ = run_method(build_taylor_green_case(c), methods[name])
        return rep

    n = resolve_threads(threads)
    levels, seeds = cfg["levels"], cfg["seeds"]
    if n > 1:
        with ThreadPoolExecutor(n) as ex:
            rows, summary = noise_sweep(run_case, list(methods), levels, seeds, ex)
    else:
        rows, summary = noise_sweep(run_case, list(methods), levels, seeds)
    trend = {m: sweep_trend(summary, m) for m in methods}
    return rows, summary, trend


def write_sweep(path, cfg, rows, summary, trend):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "level", "seed", "relative_mae", "error"])
        for r in rows:
            w.writerow([r["method"], io._fmt(r["level"]), r["seed"], io._fmt(r["relative_mae"]),
                        r["error"] or ""])
    with open(path.with_name(path.stem + "_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "level", "n", "mean", "min", "max"])
        for r in summary:
            w.writerow([r["method"], io._fmt(r["level"]), r["n"], io._fmt(r["mean"]),
                        io._fmt(r["min"]), io._fmt(r["max"])])
    io.write_json(path.with_suffix(".json"), {
        "toolkit_version": __version__, "config": cfg, "spearman": trend,
        "wall_time": {f"{r['method']}/{r['level']}/{r['seed']}": r["wall_time"] for r in rows},
    })


__all__ = ["RUN_SCHEMA", "SWEEP_SCHEMA", "Case", "ConfigError", "PressrecError", "build_case",
           "generate", "resolve_config", "resolve_sweep_config", "run_method", "run_pipeline",
           "run_sweep", "write_sweep"]
