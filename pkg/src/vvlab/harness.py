"""Experiment orchestration: build runs from configs, monitor, persist, report."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np

from . import cclab, diagnostics as dg, geometry as geo
from .config import (
    DivCurlConfig,
    ExperimentConfig,
    GeometryConfig,
    RiemannConfig,
    SystemConfig,
    parse_config,
)
from .core import Grid1D, Grid2D, RunRecord, evaluate_expression, l1_distance, project_initial_data
from .core import verify_manifest, write_csv, write_manifest, snapshot_subset, write_snapshots
from .entropy import (
    builtin_scalar_pairs,
    flux_from_expression,
    get_flux,
    half_square_pair,
    mechanical_energy_pair,
    psi_pairs,
    scalar_entropy_pair,
)
from .gas import GasModel
from .reference import euler_wave_fan, exact_profile, reference_solve, scalar_wave_fan
from .svg import line_plot
from .viscous import (
    BackgroundProfile,
    LineBC,
    Schedule,
    SolverBreakdown,
    SphericalSchedule,
    SystemSpec,
    mollified_step,
    solve,
)

log = logging.getLogger(__name__)

OUTPUT_ENV = "VVLAB_OUT"
DEFAULT_OUTPUT = "vvlab_out"

EXIT_OK, EXIT_BREAKDOWN, EXIT_FAIL = 0, 1, 2

# report order; anything else sorts after these by name
MONITOR_ORDER = (
    "breakdown", "max_principle", "tv_monotonicity", "invariant_region", "energy", "dissipation",
    "density_derivative", "density_derivative_cumulative", "higher_integrability",
    "entropy_production", "spherical_energy", "concentration", "gap", "diracness",
    "commutation_residual",
)


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def resolve_output(out: str | os.PathLike | None, configured: str | None) -> Path:
    """``--out`` beats the config's ``output``, which beats ``$VVLAB_OUT``."""
    for candidate in (out, configured, os.environ.get(OUTPUT_ENV)):
        if candidate:
            return Path(candidate)
    return Path(DEFAULT_OUTPUT)


@dataclass
class RunManifest:
    path: Path
    data: dict
    exit_code: int

    @property
    def verdicts(self) -> list[dict]:
        return self.data.get("verdicts", [])

    @property
    def root(self) -> Path:
        return self.path.parent

    def files(self) -> list[Path]:
        return [self.root / f["path"] for f in self.data["files"]]


class _Writer:
    """Single funnel for every file a job writes, so the manifest inventory is complete."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[Path] = []

    def add(self, path: Path) -> Path:
        self.files.append(Path(path))
        return path

    def csv(self, rel: str, header, rows) -> Path:
        return self.add(write_csv(self.root / rel, header, rows))

    def svg(self, rel: str, curves, **kw) -> Path:
        return self.add(line_plot(self.root / rel, curves, **kw))

    def finish(self, payload: dict) -> RunManifest:
        files = sorted(set(self.files), key=lambda p: str(p))
        exit_code = payload["exit_code"]
        data = write_manifest(self.root / "manifest.json", payload, files)
        return RunManifest(self.root / "manifest.json", data, exit_code)


def _row(monitor: str, epsilon=None, passed=None, first_violation=None, sup=None, bound=None,
         detail: str = "") -> dict:
    def num(v):
        return None if v is None else float(v)

    return {
        "monitor": monitor, "epsilon": num(epsilon),
        "passed": None if passed is None else bool(passed),
        "first_violation": num(first_violation), "sup": num(sup), "bound": num(bound),
        "detail": detail,
    }


def _exit_code(rows: list[dict], broke: bool) -> int:
    if broke:
        return EXIT_BREAKDOWN
    return EXIT_FAIL if any(r.get("passed") is False for r in rows) else EXIT_OK


# ---------------------------------------------------------------------------
# Building blocks from config


def build_flux(flux):
    if isinstance(flux, str):
        return get_flux(flux)
    flux = dict(flux)
    if "expr" in flux:
        return flux_from_expression(flux["expr"], convex=bool(flux.get("convex", False)))
    return get_flux(flux.pop("name"), **flux)


def build_system(cfg: SystemConfig) -> SystemSpec:
    if cfg.tag == "scalar":
        return SystemSpec.scalar(build_flux(cfg.flux))
    model = GasModel(cfg.gamma, cfg.kappa, cfg.delta)
    if cfg.tag == "euler_artificial":
        return SystemSpec.euler(model)
    if cfg.tag == "navier_stokes":
        return SystemSpec.navier_stokes(model)
    return SystemSpec.spherical(model, cfg.dim)


# snapshot gap for scalar entropy production, as a Courant number
ENTROPY_SNAPSHOT_COURANT = 0.5


def _schedule(cfg: ExperimentConfig, spec: SystemSpec | None = None, U0=None, grid=None) -> Schedule:
    s = cfg.snapshots
    names = {m.name for m in cfg.monitors}
    explicit = s.times is not None or s.every is not None or s.count is not None
    if "entropy_production" in names and "energy" not in names and not explicit \
            and spec is not None and spec.tag == "scalar" and cfg.t_final > 0:
        # the maximum principle bounds the wave speed by f' over the initial
        # range, so snapshots can be spaced at a fixed Courant number
        # instead of every (diffusion-limited) step
        lo, hi = float(np.min(U0)), float(np.max(U0))
        speed = float(np.max(np.abs(spec.flux.df(np.linspace(lo, hi, 257)))))
        if speed > 0:
            gap = ENTROPY_SNAPSHOT_COURANT * grid.spacing / speed
            return Schedule.uniform(cfg.t_final, max(1, int(np.ceil(cfg.t_final / gap))))
    if names & {"entropy_production", "energy"}:
        # space-time differences and the dissipation integral need every
        # accepted step unless told otherwise
        return Schedule(cfg.t_final, times=tuple(s.times) if s.times else None, every=s.every or 1)
    if s.times is not None:
        return Schedule(cfg.t_final, times=tuple(s.times), every=s.every)
    if s.every is not None:
        return Schedule(cfg.t_final, every=s.every)
    return Schedule.uniform(cfg.t_final, s.count or 10)


def _grid_and_bc(cfg: ExperimentConfig, eps: float):
    g = cfg.grid
    if cfg.bc.kind == "spherical":
        b = cfg.bc
        bc = SphericalSchedule(b.c_a, b.c_b, b.c_rho, b.c_delta, b.p_a, b.p_b, b.p_rho, b.p_delta)(eps)
        lo, hi = bc.a_eps, bc.b_eps
    else:
        lo, hi = g.x_min, g.x_max
        if cfg.bc.kind == "dirichlet":
            bc = LineBC.dirichlet(cfg.bc.left, cfg.bc.right)
        else:
            bc = LineBC(cfg.bc.kind)
    n = g.n_cells
    if g.spacing_per_eps is not None:
        n = max(4, int(np.ceil((hi - lo) / (g.spacing_per_eps * eps) - 1e-9)))
    return Grid1D(lo, hi, n), bc


def _background(cfg: ExperimentConfig) -> BackgroundProfile | None:
    b = cfg.background
    if b is None:
        return None
    return BackgroundProfile(b.rho_minus, b.u_minus, b.rho_plus, b.u_plus, b.half_width, b.center)


def _field(spec, grid: Grid1D, params: dict) -> np.ndarray:
    """One initial field; expressions see ``eps`` and the other ``params``."""
    if isinstance(spec, dict):
        kind = spec.get("type")
        if kind == "expression":
            merged = {**params, **spec.get("params", {})}
            return evaluate_expression(spec["expr"], grid.centers, **merged)
        if kind == "riemann" and ("width" in spec or "width_per_eps" in spec):
            width = spec.get("width", spec.get("width_per_eps", 0.0) * params["eps"])
            x0 = float(spec.get("interface", 0.5 * (grid.x_min + grid.x_max)))
            return mollified_step(grid.centers, float(spec["left"]), float(spec["right"]), x0, width)
    return project_initial_data(spec, grid)


def build_initial(cfg: ExperimentConfig, spec: SystemSpec, grid: Grid1D, eps: float, bc,
                  background: BackgroundProfile | None = None) -> np.ndarray:
    params: dict[str, Any] = {"eps": eps}
    if background is not None:
        rho_bg, u_bg = background(grid.centers)
        params.update(rho_bg=rho_bg, u_bg=u_bg)
    if spec.tag == "spherical":
        params.update(rho_bar=bc.rho_bar_eps, a=bc.a_eps, b=bc.b_eps)
    init = cfg.initial
    if spec.tag == "scalar":
        return _field(init, grid, params)[None, :]
    if not isinstance(init, dict) or "rho" not in init or ("m" in init) == ("u" in init):
        raise ValueError("gas initial data needs 'rho' and exactly one of 'm' or 'u'")
    rho = _field(init["rho"], grid, params)
    if "m" in init:
        m = _field(init["m"], grid, params)
    else:
        m = rho * _field(init["u"], grid, params)
    return np.stack([rho, m])


def entropy_pairs(spec: SystemSpec, names=None) -> dict:
    """Pairs addressable by name for monitors and the commutation analysis."""
    if spec.tag == "scalar":
        identity = scalar_entropy_pair(spec.flux, lambda U: U * 1.0, lambda U: np.ones_like(U),
                                       convex=False, name="identity")
        pairs = [identity, *builtin_scalar_pairs(spec.flux), half_square_pair(spec.flux)]
        table = {p.name: p for p in pairs}
    else:
        table = {"mechanical": mechanical_energy_pair(spec.model)}
        if spec.model.delta == 0:
            for k, p in enumerate(psi_pairs(spec.model, (0, 1, 2))):
                table[f"psi{k}"] = p
    if names is None:
        return table
    missing = [n for n in names if n not in table]
    if missing:
        raise ValueError(f"unknown entropy pair(s) {missing}; available: {sorted(table)}")
    return {n: table[n] for n in names}


# ---------------------------------------------------------------------------
# Monitors


def _entropy_series(run: RunRecord, pair, x_window) -> dg.MonitorSeries:
    fld = dg.entropy_production(run, pair)
    if x_window is not None:
        fld = fld.window(x_range=tuple(x_window))
    dt = np.asarray(fld.meta["dt"])
    per_row = np.sum(np.maximum(fld.values, 0.0), axis=1) * fld.spacing[1] * dt
    return dg.MonitorSeries("entropy_production", fld.times, np.cumsum(per_row),
                            meta={"pair": pair.name, "integral": float(np.sum(per_row))})


def run_monitors(cfg: ExperimentConfig, spec: SystemSpec, run: RunRecord, background) -> dict:
    """Evaluate the configured monitors on one run: name -> MonitorSeries (or profile)."""
    out: dict[str, Any] = {}
    for m in cfg.monitors:
        tol = m.tol
        if m.name == "max_principle":
            out[m.name] = dg.max_principle_check(run, tol if tol is not None else 1e-10,
                                                 bounds=tuple(m.bound) if m.bound else None)
        elif m.name == "tv_monotonicity":
            out[m.name] = dg.tv_monotonicity_check(run, tol if tol is not None else 1e-8)
        elif m.name == "invariant_region":
            out[m.name] = dg.invariant_region_check(spec.model, run, tol if tol is not None else 1e-8,
                                                    bounds=tuple(m.bound) if m.bound else None)
        elif m.name == "dissipation":
            out[m.name] = dg.dissipation_monitor(run)
        elif m.name == "energy":
            out[m.name] = dg.energy_monitor(run, background, tol if tol is not None else 1e-3)
        elif m.name == "density_derivative":
            inst, cum = dg.density_derivative_monitor(run)
            out[inst.name], out[cum.name] = inst, cum
        elif m.name == "higher_integrability":
            out[m.name] = dg.higher_integrability_monitor(run, tuple(m.window))
        elif m.name == "entropy_production":
            pair = entropy_pairs(spec, [m.pair])[m.pair]
            out[m.name] = _entropy_series(run, pair, m.x_window)
        elif m.name == "spherical_energy":
            out[m.name] = dg.spherical_energy_monitor(run)
        elif m.name == "concentration":
            lo, hi = run.grid.x_min, run.grid.x_max
            radii = [r for r in m.radii if lo <= r <= hi]
            out[m.name] = dg.concentration_profile(run, radii)
    return out


# sweep-level criteria: quantity extracted from each run's series, then compared over eps
_UNIFORM = {"energy", "dissipation", "density_derivative", "density_derivative_cumulative",
            "higher_integrability", "spherical_energy"}


def _series_rows(series: dict, eps: float) -> list[dict]:
    rows = []
    for name, s in series.items():
        if isinstance(s, dg.MonitorSeries):
            bound = s.bound if s.bound is None or np.ndim(s.bound) == 0 else np.max(s.bound)
            rows.append(_row(name, eps, None if s.verdicts is None else s.passed,
                             s.first_violation, s.sup, bound))
    return rows


# ---------------------------------------------------------------------------
# run / sweep


def execute(config, out: str | os.PathLike | None = None, kind: str = "experiment") -> RunManifest:
    """Run every eps of ``config``, evaluate monitors and sweep analyses, persist everything.

    Returns the manifest; ``exit_code`` is 0 when all verdicts pass, 2 when any
    fails and 1 when a solver broke down.
    """
    cfg = config if isinstance(config, ExperimentConfig) else parse_config(config, kind)
    root = resolve_output(out, cfg.output) / cfg.name
    w = _Writer(root)
    spec = build_system(cfg.system)
    background = _background(cfg)
    rows: list[dict] = []
    runs: list[RunRecord] = []
    per_run: list[dict] = []
    breakdowns = []
    run_info = []
    for k, eps in enumerate(cfg.epsilons):
        tag = f"eps_{k}"
        grid, bc = _grid_and_bc(cfg, eps)
        U0 = build_initial(cfg, spec, grid, eps, bc, background)
        schedule = _schedule(cfg, spec, U0, grid)
        try:
            run = solve(spec, U0, eps, grid, schedule, bc, cfl_h=cfg.cfl_h, cfl_p=cfg.cfl_p)
            broke = None
        except SolverBreakdown as exc:
            run, broke = exc.record, str(exc)
            breakdowns.append({"epsilon": eps, "message": broke, "t": exc.t})
            rows.append(_row("breakdown", eps, False, exc.t, detail=broke))
            log.error("breakdown at eps=%g: %s", eps, broke)
        limit = cfg.snapshots.write_limit
        w.add(write_snapshots(run, root / tag / "snapshots.csv", limit))
        run_info.append({"epsilon": eps, "dir": tag, "n_cells": grid.n_cells,
                         "x_min": grid.x_min, "x_max": grid.x_max,
                         "n_steps": int(run.meta.get("n_steps", 0)),
                         "cell_peclet": float(run.meta.get("cell_peclet", 0.0)),
                         "snapshots": int(run.times.size),
                         "snapshots_written": int(snapshot_subset(run.times.size, limit).size)})
        series = {} if broke else run_monitors(cfg, spec, run, background)
        for name, s in series.items():
            if isinstance(s, dg.MonitorSeries):
                w.add(s.to_csv(root / tag / "monitors" / f"{name}.csv"))
                w.svg(f"{tag}/plots/{name}.svg", [(f"eps={eps:.4g}", s.times, s.values)],
                      title=name, xlabel="t", ylabel=name)
            else:
                w.csv(f"{tag}/monitors/{name}.csv", ["r0", "sup_mass"], zip(s.radii, s.sup))
        rows.extend(_series_rows(series, eps))
        runs.append(run)
        per_run.append(series)

    sweep_rows = [] if breakdowns else _sweep_analyses(cfg, spec, runs, per_run, w)
    payload = {
        "kind": "sweep" if cfg.sweep is not None else "run",
        "name": cfg.name,
        "system": spec.tag,
        "config": cfg.model_dump(mode="json"),
        "tool": {"name": "vvlab", "version": tool_version()},
        "runs": run_info,
        "verdicts": rows,
        "sweep": sweep_rows,
        "breakdowns": breakdowns,
    }
    payload["exit_code"] = _exit_code(rows + sweep_rows, bool(breakdowns))
    return w.finish(payload)


def _sweep_row(name: str, eps, values, passed, criterion: str) -> dict:
    return {
        "monitor": name, "epsilons": [float(e) for e in eps], "values": [float(v) for v in values],
        "trend": dg.trend_arrow(eps, values) if len(eps) > 1 else "flat",
        "passed": None if passed is None else bool(passed), "criterion": criterion,
    }


def _sweep_analyses(cfg, spec, runs, per_run, w: _Writer) -> list[dict]:
    eps = [r.epsilon for r in runs]
    out = []
    columns: dict[str, list[float]] = {}
    if len(runs) > 1:
        names = [n for n in per_run[0] if isinstance(per_run[0][n], dg.MonitorSeries)]
        for name in names:
            values = [s[name].sup for s in per_run]
            columns[name] = values
            if name in _UNIFORM:
                out.append(_sweep_row(name, eps, values, dg.uniform_bound_verdict(values), "max<=2*median"))
            elif name == "entropy_production":
                out.append(_sweep_row(name, eps, values, dg.strictly_decreasing(values), "decreasing"))
        if columns:
            w.add(dg.sweep_table(w.root / "sweep.csv", eps, columns))
            for name, values in columns.items():
                w.svg(f"plots/sweep_{name}.svg", [(name, eps, values)], title=f"sup {name} vs eps",
                      xlabel="eps", ylabel=name, logx=True)
        if "concentration" in per_run[0]:
            out.extend(_concentration_summary(per_run, eps, w))

    ref_cfg = cfg.reference
    if ref_cfg is not None:
        cache: dict[tuple, RunRecord] = {}
        gaps = []
        for run in runs:
            U0 = build_initial(cfg, spec, run.grid, run.epsilon, run.meta["bc"], _background(cfg))
            key = (run.grid.n_cells, U0.tobytes())
            if key not in cache:
                cache[key] = reference_solve(spec, U0, run.grid, cfg.t_final, run.meta["bc"],
                                             scheme=ref_cfg.scheme, cfl=ref_cfg.cfl)
            gaps.append(l1_distance(run.snapshots[-1], cache[key].snapshots[-1], run.grid))
        w.csv("gap.csv", ["epsilon", "l1_gap"], zip(eps, gaps))
        w.svg("plots/gap.svg", [("L1 gap", eps, gaps)], title="L1 gap to reference vs eps",
              xlabel="eps", ylabel="gap", logx=True, logy=True)
        passed = dg.strictly_decreasing(gaps) if len(gaps) > 1 else None
        row = _sweep_row("gap", eps, gaps, passed, "decreasing")
        if len(gaps) > 1 and min(gaps) > 0:
            row["observed_order"] = dg.observed_order(eps, gaps)
        out.append(row)

    shared = len({(r.grid.n_cells, r.times.size) for r in runs}) == 1
    cc = cfg.cclab
    if cc is not None and len(runs) >= 4 and shared:
        macro = tuple(cc.macrocell)
        if cc.pairs:
            pair_names = list(cc.pairs)
        elif spec.tag == "scalar":
            pair_names = ["identity", "square"]
        elif spec.tag == "euler_artificial" and spec.model.delta == 0:
            pair_names = ["psi0", "psi1", "psi2"]
        else:
            pair_names = ["mechanical"]
        pairs = list(entropy_pairs(spec, pair_names).values())
        rep = cclab.weak_continuity_sweep(runs, pairs, macro)
        w.add(rep.to_csv(w.root / "diracness.csv"))
        w.svg("plots/diracness.svg", [("mean diracness", eps, rep.mean_diracness),
                                      ("max residual", eps, rep.max_residual)],
              title="diracness and commutation residual vs eps", xlabel="eps", logx=True, logy=True)
        out.append(_sweep_row("diracness", eps, rep.mean_diracness,
                              rep.verdicts["diracness_decreasing"], "decreasing"))
        if len(pairs) > 1:
            out.append(_sweep_row("commutation_residual", eps, rep.max_residual, None, "trend"))
    return out


def _concentration_summary(per_run, eps, w: _Writer) -> list[dict]:
    profiles = [s["concentration"] for s in per_run]
    common = sorted(set.intersection(*(set(np.round(p.radii, 15)) for p in profiles)))
    if not common:
        return []
    table = np.array([[p.sup[np.argmin(np.abs(p.radii - r))] for r in common] for p in profiles])
    sup_eps = table.max(axis=0)
    header = ["r0", *[f"eps_{k}" for k in range(len(eps))], "sup"]
    w.csv("concentration.csv", header, zip(common, *table, sup_eps))
    w.svg("plots/concentration.svg", [("sup over eps", common, sup_eps)], title="mass within r0",
          xlabel="r0", ylabel="mass", logx=True, logy=True)
    radii = np.asarray(common)
    positive = sup_eps > 0
    exponent = dg.observed_order(radii[positive], sup_eps[positive]) if positive.sum() > 1 else 0.0
    # mass in a ball shrinks with r0 (no atom at the origin): increasing in r0, positive exponent
    ok = bool(np.all(np.diff(sup_eps) > 0) and exponent > 0)
    row = _sweep_row("concentration", radii, sup_eps, ok, "increasing in r0, exponent>0")
    row["trend"] = "↓" if ok else "↑"
    row["exponent"] = exponent
    row["radii"] = [float(r) for r in radii]
    return [row]


# ---------------------------------------------------------------------------
# riemann / geometry / divcurl


def execute_riemann(config, out=None) -> RunManifest:
    cfg = config if isinstance(config, RiemannConfig) else parse_config(config, "riemann")
    root = resolve_output(out, cfg.output) / cfg.name
    w = _Writer(root)
    spec = build_system(cfg.system)
    if spec.tag == "scalar":
        data = (float(cfg.left), float(cfg.right))
        fan = scalar_wave_fan(spec.flux, data)
    else:
        data = (tuple(map(float, cfg.left)), tuple(map(float, cfg.right)))
        fan = euler_wave_fan(spec.model, data)
    grid = Grid1D(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_cells)
    vals = exact_profile(spec, data, grid.centers, cfg.t, cfg.interface)
    w.csv("profile.csv", ["x", *spec.field_names], zip(grid.centers, *vals))
    speeds = fan.speeds()
    w.csv("waves.csv", ["wave", "speed"], ((str(i), s) for i, s in enumerate(speeds)))
    w.svg("plots/profile.svg", [(n, grid.centers, v) for n, v in zip(spec.field_names, vals)],
          title=f"exact Riemann solution at t={cfg.t:g}", xlabel="x")
    rows = [_row("wave_order", passed=bool(np.all(np.diff(speeds) >= -1e-12)))]
    payload = {"kind": "riemann", "name": cfg.name, "system": spec.tag,
               "config": cfg.model_dump(mode="json"),
               "tool": {"name": "vvlab", "version": tool_version()},
               "waves": [str(wv) for wv in fan.waves], "verdicts": rows, "sweep": []}
    payload["exit_code"] = _exit_code(rows, False)
    return w.finish(payload)


def _surface_case(case: str, n: int, radius: float, bounds):
    """Metric, second form and exact curvature for the geometry subcommand."""
    if case == "sphere":
        b = bounds or [0.5, np.pi - 0.5, 0.0, 2 * np.pi]
        grid = Grid2D(b[0], b[1], n, b[2], b[3], n, False, False)
        return grid, *geo.sphere_fields(grid, radius)
    b = bounds or [-1.0, 1.0, -1.0, 1.0]
    grid = Grid2D(b[0], b[1], n, b[2], b[3], n, False, False)
    X, _ = grid.mesh()
    if case == "plane":
        metric = geo.MetricField(grid, 1.0, 0.0, 1.0)
        forms = geo.SecondFormField(grid, 0.0, 0.0, 0.0)
        return grid, metric, forms, np.zeros(grid.shape)
    if case == "hyperbolic":
        return grid, geo.MetricField(grid, 1.0, 0.0, np.exp(2 * X)), None, np.full(grid.shape, -1.0)
    raise ValueError(f"no surface data for case {case!r}")


def _surface_residuals(case, n, radius, bounds):
    grid, metric, forms, K = _surface_case(case, n, radius, bounds)
    res = {"curvature": geo.interior(geo.gauss_curvature(metric) - K)}
    if forms is not None:
        r1, r2 = geo.codazzi_residual(metric, forms)
        res["codazzi_1"], res["codazzi_2"] = geo.interior(r1), geo.interior(r2)
        res["gauss"] = geo.interior(geo.gauss_residual(forms, geo.gauss_curvature(metric)))
        g = metric.tensor()
        h = np.array([[forms.L, forms.M], [forms.M, forms.N]]) * np.sqrt(metric.det)
        gcr = geo.gcr_residual(geo.GCRFields(grid.spacing, h[None], g)).max_abs()
        res["gcr_gauss"] = np.array([gcr["gauss"]])
        res["gcr_codazzi"] = np.array([gcr["codazzi"]])
    return grid, res


def execute_geometry(config, out=None) -> RunManifest:
    cfg = config if isinstance(config, GeometryConfig) else parse_config(config, "geometry")
    root = resolve_output(out, cfg.output) / cfg.name
    w = _Writer(root)
    rows = []
    if cfg.case == "fluid":
        rows = _fluid_check(cfg, w)
    elif cfg.case == "clifford_torus":
        norms = []
        for n in (cfg.n, 2 * cfg.n):
            grid = Grid2D(0.0, 2 * np.pi, n, 0.0, 2 * np.pi, n, False, False)
            norms.append(geo.gcr_residual(geo.clifford_torus_gcr(grid)).max_abs())
        hs = [2 * np.pi / n for n in (cfg.n, 2 * cfg.n)]
        w.csv("residuals.csv", ["n", "gauss", "codazzi", "ricci"],
              ([n, r["gauss"], r["codazzi"], r["ricci"]] for n, r in zip((cfg.n, 2 * cfg.n), norms)))
        for key in ("gauss", "codazzi", "ricci"):
            a, b = norms[0][key], norms[1][key]
            rows.append(_order_row(key, hs, [a, b]))
    else:
        ns = (cfg.n, 2 * cfg.n)
        results = [_surface_residuals(cfg.case, n, cfg.radius, cfg.bounds) for n in ns]
        grid, fine = results[0]
        keys = list(fine)
        sup = [{k: float(np.max(np.abs(res[k]))) for k in keys} for _, res in results]
        w.csv("residuals.csv", ["n", *keys], ([n, *[s[k] for k in keys]] for n, s in zip(ns, sup)))
        X, Y = grid.mesh()
        fields = [k for k in keys if fine[k].ndim == 2]
        Xi, Yi = geo.interior(X), geo.interior(Y)
        w.csv("residual_grid.csv", ["x", "y", *fields],
              zip(Xi.ravel(), Yi.ravel(), *[fine[k].ravel() for k in fields]))
        hs = [results[0][0].dx, results[1][0].dx]
        for k in keys:
            if cfg.case == "plane":
                rows.append(_row(k, passed=max(s[k] for s in sup) == 0.0, sup=sup[-1][k], bound=0.0))
            else:
                rows.append(_order_row(k, hs, [s[k] for s in sup]))
    payload = {"kind": "geometry", "name": cfg.name, "config": cfg.model_dump(mode="json"),
               "tool": {"name": "vvlab", "version": tool_version()}, "verdicts": rows, "sweep": []}
    payload["exit_code"] = _exit_code(rows, False)
    return w.finish(payload)


def _order_row(name, hs, errs, min_order: float = 1.8, floor: float = 1e-12) -> dict:
    if max(errs) <= floor:
        return _row(name, passed=True, sup=max(errs), detail="exact to rounding")
    order = dg.observed_order(hs, errs) if min(errs) > 0 else np.inf
    return _row(name, passed=order >= min_order, sup=errs[-1], bound=min_order,
                detail=f"observed order {order:.3f}")


def random_bernoulli_states(n: int, seed: int = 0):
    """Random ``(rho, u, v)`` fluid states with density in ``[0.2, 5]`` and speed up to 3."""
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.2, 5.0, n)
    q = rng.uniform(0.0, 3.0, n)
    ang = rng.uniform(0.0, 2 * np.pi, n)
    return rho, q * np.cos(ang), q * np.sin(ang)


def _fluid_check(cfg: GeometryConfig, w: _Writer) -> list[dict]:
    rho, u, v = random_bernoulli_states(cfg.samples, cfg.seed)
    L, M, N = geo.fluid_forms(rho, u, v)
    p = -1.0 / rho
    q2 = u**2 + v**2
    K_forms = L * N - M**2
    K_fluid = p * (rho * q2 + p)
    ident = np.abs(K_forms - K_fluid)
    back = geo.fluid_state(L, M, N, K_forms)
    # the inverse picks u >= 0, so compare against the matching branch
    sign = np.where((u < 0) | ((u == 0) & (v < 0)), -1.0, 1.0)
    trip = np.max(np.abs(np.stack([back.rho - rho, back.u - sign * u, back.v - sign * v])))
    codes = geo.sonic_classification(K_forms, q2)
    expected = np.where(K_fluid > 0, geo.SUBSONIC, geo.SUPERSONIC)
    expected = np.where(np.abs(K_fluid) < 1e-10 * (1 + q2), geo.SONIC, expected)
    w.csv("fluid_states.csv", ["rho", "u", "v", "L", "M", "N", "K", "flow_type"],
          zip(rho, u, v, L, M, N, K_forms, codes))
    return [
        _row("fluid_identity", passed=ident.max() <= 1e-12, sup=ident.max(), bound=1e-12),
        _row("fluid_round_trip", passed=trip <= 1e-12, sup=trip, bound=1e-12),
        _row("sonic_classification", passed=bool(np.all(codes == expected)),
             sup=float(np.sum(codes != expected))),
    ]


def execute_divcurl(config, out=None) -> RunManifest:
    cfg = config if isinstance(config, DivCurlConfig) else parse_config(config, "divcurl")
    root = resolve_output(out, cfg.output) / cfg.name
    w = _Writer(root)
    grid = Grid2D(0.0, 2 * np.pi, cfg.n, 0.0, 2 * np.pi, cfg.n, True, True)
    u, v = cclab.canonical_families(cfg.pair, grid, cfg.epsilons)
    rep = cclab.div_curl_experiment(u, v, cfg.averaging_scale, cfg.macrocell)
    w.add(rep.to_csv(root / "divcurl.csv"))
    w.csv("gap.csv", ["epsilon", "gap"], zip(rep.epsilons, rep.gap))
    w.svg("plots/divcurl.svg", [("gap", rep.epsilons, rep.gap), ("div proxy", rep.epsilons, rep.div_proxy),
                                ("curl proxy", rep.epsilons, rep.curl_proxy)],
          title=f"div-curl ({cfg.pair})", xlabel="eps", logx=True)
    rows = [_row("divcurl_consistent", passed=rep.verdicts["consistent"], sup=float(rep.gap[-1]),
                 detail=f"compact={rep.verdicts['proxies_compact']} gap_vanishing={rep.verdicts['gap_vanishing']}")]
    sweep = [_sweep_row("gap", rep.epsilons, rep.gap, None, "trend"),
             _sweep_row("div_proxy", rep.epsilons, rep.div_proxy, None, "trend"),
             _sweep_row("curl_proxy", rep.epsilons, rep.curl_proxy, None, "trend"),
             _sweep_row("div_l2", rep.epsilons, rep.div_l2, None, "trend"),
             _sweep_row("curl_l2", rep.epsilons, rep.curl_l2, None, "trend")]
    payload = {"kind": "divcurl", "name": cfg.name, "config": cfg.model_dump(mode="json"),
               "tool": {"name": "vvlab", "version": tool_version()}, "verdicts": rows, "sweep": sweep,
               "verdict_flags": {k: v for k, v in rep.verdicts.items()}}
    payload["exit_code"] = _exit_code(rows, False)
    return w.finish(payload)


EXECUTORS = {"run": execute, "sweep": execute, "riemann": execute_riemann,
             "geometry": execute_geometry, "divcurl": execute_divcurl}


# ---------------------------------------------------------------------------
# Reporting


def _order_key(name: str):
    return (MONITOR_ORDER.index(name), "") if name in MONITOR_ORDER else (len(MONITOR_ORDER), name)


def _cell(v, width: int = 12) -> str:
    if v is None:
        return "-".ljust(width)
    if isinstance(v, float):
        return f"{v:.4g}".ljust(width)
    return str(v).ljust(width)


def _verdict(passed) -> str:
    return "-" if passed is None else ("PASS" if passed else "FAIL")


def load_manifest(manifest) -> dict:
    if isinstance(manifest, RunManifest):
        path, data = manifest.path, manifest.data
    elif isinstance(manifest, dict):
        return manifest
    else:
        path = Path(manifest)
        if path.is_dir():
            path = path / "manifest.json"
        data = json.loads(path.read_text())
    missing = [f["path"] for f in data["files"] if not (path.parent / f["path"]).exists()]
    if missing:
        raise FileNotFoundError(f"manifest lists missing files: {missing}")
    if not verify_manifest(path):
        raise ValueError("manifest hashes do not match the files on disk")
    return data


def emit_report(manifest) -> str:
    """Fixed-order plaintext table of verdict rows and sweep trends."""
    data = load_manifest(manifest)
    lines = [f"{data.get('kind', 'run')} {data.get('name', '')}: exit {data.get('exit_code')}"]
    rows = sorted(data.get("verdicts", []),
                  key=lambda r: (_order_key(r["monitor"]), -(r["epsilon"] or 0.0)))
    if rows:
        lines.append("".join(h.ljust(w) for h, w in (("monitor", 32), ("eps", 12), ("sup", 12),
                                                     ("bound", 12), ("verdict", 9), ("first_violation", 16))))
        for r in rows:
            lines.append(
                r["monitor"].ljust(32) + _cell(r["epsilon"]) + _cell(r["sup"]) + _cell(r["bound"])
                + _verdict(r["passed"]).ljust(9) + _cell(r["first_violation"], 16)
                + (f" {r['detail']}" if r.get("detail") else "")
            )
    sweep = sorted(data.get("sweep", []), key=lambda r: _order_key(r["monitor"]))
    if sweep:
        lines.append("")
        lines.append("sweep trends")
        for r in sweep:
            label = "r0" if r["monitor"] == "concentration" else "eps"
            cols = "  ".join(f"{label}={e:.4g}:{v:.4g}" for e, v in zip(r["epsilons"], r["values"]))
            lines.append(f"{r['monitor'].ljust(32)}{cols}  trend {r['trend']}  {_verdict(r['passed'])}"
                         f" ({r['criterion']})")
    return "\n".join(lines) + "\n"
