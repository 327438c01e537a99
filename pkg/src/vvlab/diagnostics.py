"""Monitors for the a-priori estimates of the viscous systems.

Every monitor is a pure function of a completed :class:`~vvlab.core.RunRecord`.
Time integrals use the trapezoidal rule over the stored snapshots, so runs
feeding cumulative monitors should save snapshots densely (``Schedule(every=k)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.fft import dstn

from .core import VACUUM_FLOOR, EulerState, RunRecord, velocity, write_csv
from .entropy import EntropyPair, relative_mechanical_energy
from .gas import GasModel, _sound_speed_or_zero, internal_energy, invariants_of_state
from .viscous import BackgroundProfile, LineBC, SphericalBC


@dataclass
class MonitorSeries:
    """A named time series with an optional bound and per-time verdicts."""

    name: str
    times: np.ndarray
    values: np.ndarray
    bound: np.ndarray | float | None = None
    verdicts: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("monitor times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"monitor {self.name!r} has non-finite values")
        if self.verdicts is not None:
            self.verdicts = np.asarray(self.verdicts, dtype=bool)

    @property
    def passed(self) -> bool:
        return True if self.verdicts is None else bool(np.all(self.verdicts))

    @property
    def first_violation(self) -> float | None:
        if self.verdicts is None or self.passed:
            return None
        return float(self.times[np.argmin(self.verdicts)])

    @property
    def sup(self) -> float:
        return float(np.max(self.values))

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def to_csv(self, path) -> Path:
        header = ["t", "value"]
        cols = [self.times, self.values]
        if self.bound is not None:
            header.append("bound")
            cols.append(np.broadcast_to(np.asarray(self.bound, dtype=float), self.times.shape))
        if self.verdicts is not None:
            header.append("verdict")
            cols.append(self.verdicts.astype(int))
        return write_csv(path, header, zip(*cols))


@dataclass
class SpaceTimeField:
    """Values on the ``(t, x)`` lattice of a run (rows are time levels)."""

    values: np.ndarray
    times: np.ndarray
    x: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.times), len(self.x)):
            raise ValueError("field shape must be (len(times), len(x))")

    @property
    def spacing(self) -> tuple[float, float]:
        dt = float(np.mean(np.diff(self.times))) if len(self.times) > 1 else 1.0
        dx = float(self.x[1] - self.x[0])
        return dt, dx

    def window(self, t_range=None, x_range=None) -> "SpaceTimeField":
        tm = np.ones(len(self.times), bool) if t_range is None else (
            (self.times >= t_range[0]) & (self.times <= t_range[1]))
        xm = np.ones(len(self.x), bool) if x_range is None else (
            (self.x >= x_range[0]) & (self.x <= x_range[1]))
        meta = dict(self.meta)
        if "dt" in meta:
            meta["dt"] = np.asarray(meta["dt"])[tm]
        return SpaceTimeField(self.values[np.ix_(tm, xm)], self.times[tm], self.x[xm], meta)

    def integral(self, positive_part: bool = False) -> float:
        """Riemann sum with the per-row time weights stored in ``meta['dt']``."""
        v = np.maximum(self.values, 0.0) if positive_part else self.values
        dt = np.asarray(self.meta.get("dt", np.full(len(self.times), self.spacing[0])))
        return float(np.sum(v * dt[:, None]) * self.spacing[1])


# ---------------------------------------------------------------------------
# Helpers


def _trapezoid_cumulative(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 2:
        return np.zeros_like(y)
    inc = 0.5 * (y[1:] + y[:-1]) * np.diff(t)
    return np.concatenate([[0.0], np.cumsum(inc)])


def _is_periodic(run: RunRecord) -> bool:
    bc = run.meta.get("bc")
    return isinstance(bc, LineBC) and bc.kind == "periodic"


def _dx(values: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    """Centred derivative along the last axis (one-sided at open ends)."""
    if periodic:
        return (np.roll(values, -1, axis=-1) - np.roll(values, 1, axis=-1)) / (2 * h)
    return np.gradient(values, h, axis=-1)


def _gas_model(run: RunRecord) -> GasModel:
    if not isinstance(run.model, GasModel):
        raise ValueError("monitor needs a gas-system run")
    bc = run.meta.get("bc")
    if isinstance(bc, SphericalBC) and bc.delta_eps:
        return run.model.with_delta(run.model.delta + bc.delta_eps)
    return run.model


def total_variation(values) -> float | np.ndarray:
    """``sum |U_{j+1} - U_j|`` along the last axis."""
    tv = np.sum(np.abs(np.diff(np.asarray(values, dtype=float), axis=-1)), axis=-1)
    return float(tv) if np.ndim(tv) == 0 else tv


def _series_times(run: RunRecord, key: str):
    """Per-step monitor series when recorded, else the snapshot values."""
    if key in run.monitors and "t" in run.monitors:
        t = run.monitors["t"]
        keep = np.concatenate([[True], np.diff(t) > 0])
        return t[keep], run.monitors[key][keep]
    return None


# ---------------------------------------------------------------------------
# L-infinity and BV


def max_principle_check(run: RunRecord, tol: float = 1e-10, bounds: tuple[float, float] | None = None,
                        field_name: str | None = None) -> MonitorSeries:
    """Excess of each recorded state over the initial range.

    ``values`` is ``max(U - max U0, min U0 - U, 0)`` per accepted step.
    ``bounds`` replaces the initial range (used to force a failure).
    """
    name = field_name or run.field_names[0]
    u0 = run.field(name)[0]
    lo, hi = (float(u0.min()), float(u0.max())) if bounds is None else bounds
    span = max(hi - lo, 0.0)
    allowed = tol * span if span > 0 else tol * max(1.0, abs(hi))
    mins = _series_times(run, f"{name}_min")
    maxs = _series_times(run, f"{name}_max")
    if mins is not None and maxs is not None:
        t, vmin = mins
        vmax = maxs[1]
    else:
        t = run.times
        vmin = run.field(name).min(axis=1)
        vmax = run.field(name).max(axis=1)
    excess = np.maximum(np.maximum(vmax - hi, lo - vmin), 0.0)
    return MonitorSeries(
        "max_principle", t, excess, bound=allowed, verdicts=excess <= allowed,
        meta={"range": (lo, hi)},
    )


def tv_monotonicity_check(run: RunRecord, tol: float = 1e-8, field_name: str | None = None) -> MonitorSeries:
    """Per-step increase of the total variation relative to ``TV(U0)``."""
    name = field_name or run.field_names[0]
    series = _series_times(run, f"{name}_tv")
    t, tv = series if series is not None else (run.times, total_variation(run.field(name)))
    tv0 = tv[0]
    growth = np.concatenate([[0.0], np.maximum(np.diff(tv), 0.0)])
    allowed = tol * max(tv0, np.finfo(float).tiny)
    return MonitorSeries("tv_monotonicity", t, growth, bound=allowed, verdicts=growth <= allowed,
                         meta={"tv0": tv0, "tv": tv})


def invariant_region_check(model: GasModel | None, run: RunRecord, tol: float = 1e-8,
                           density_tol: float = 1e-12, bounds: tuple[float, float] | None = None) -> MonitorSeries:
    """Distance of the Riemann invariants outside the initial rectangle.

    ``values`` is the largest of ``w - max w0``, ``min z0 - z`` (scaled by
    ``1/scale``) and ``-rho``; vacuum cells carry no invariants.
    """
    model = model or _gas_model(run)
    rho = run.field("rho")
    m = run.field("m")

    def extremes(r, mm):
        live = r > VACUUM_FLOOR
        if not np.any(live):
            return -np.inf, np.inf
        w, z = invariants_of_state(model, r[live], mm[live])
        return float(w.max()), float(z.min())

    w0, z0 = extremes(rho[0], m[0]) if bounds is None else bounds
    scale = max(w0 - z0, abs(w0), abs(z0), np.finfo(float).tiny)
    ext = [extremes(r, mm) for r, mm in zip(rho, m)]
    w_max = np.array([e[0] for e in ext])
    z_min = np.array([e[1] for e in ext])
    t = run.times
    per_step_w = _series_times(run, "w_max")
    if per_step_w is not None and bounds is None:
        t, w_max = per_step_w
        z_min = _series_times(run, "z_min")[1]
        rho_min = _series_times(run, "rho_min")[1]
    else:
        rho_min = rho.min(axis=1)
    excess = np.maximum.reduce([
        np.maximum(w_max - w0, 0.0) / scale,
        np.maximum(z0 - z_min, 0.0) / scale,
        np.zeros_like(w_max),
    ])
    ok = (excess <= tol) & (rho_min >= -density_tol)
    return MonitorSeries("invariant_region", t, np.maximum(excess, np.maximum(-rho_min, 0.0)),
                         bound=tol, verdicts=ok,
                         meta={"w0_max": w0, "z0_min": z0, "scale": scale})


# ---------------------------------------------------------------------------
# Energy-type monitors


def dissipation_monitor(run: RunRecord) -> MonitorSeries:
    """Cumulative ``eps * int int |U_x|^2 dx dt`` summed over all fields."""
    h = run.grid.spacing
    periodic = _is_periodic(run)
    grad = _dx(run.snapshots, h, periodic)
    rate = run.epsilon * np.sum(grad**2, axis=(1, 2)) * h
    return MonitorSeries("dissipation", run.times, _trapezoid_cumulative(run.times, rate))


def _velocity_gradient(run: RunRecord) -> np.ndarray:
    rho, m = run.field("rho"), run.field("m")
    if np.any(rho <= VACUUM_FLOOR):
        raise ValueError("vacuum in run: velocity gradient undefined")
    return _dx(m / rho, run.grid.spacing, _is_periodic(run))


def _face_velocity_gradient(run: RunRecord) -> np.ndarray:
    """``u_x`` on the faces between cells, the differences the solver's viscous flux uses."""
    rho, m = run.field("rho"), run.field("m")
    if np.any(rho <= VACUUM_FLOOR):
        raise ValueError("vacuum in run: velocity gradient undefined")
    u = m / rho
    if _is_periodic(run):
        return (np.roll(u, -1, axis=-1) - u) / run.grid.spacing
    return np.diff(u, axis=-1) / run.grid.spacing


def _background_state(run: RunRecord, background) -> EulerState:
    x = run.grid.centers
    if isinstance(background, BackgroundProfile):
        return background.state(x)
    rho_bar, m_bar = background
    return EulerState(np.broadcast_to(rho_bar, x.shape).astype(float),
                      np.broadcast_to(m_bar, x.shape).astype(float))


def relative_energy_series(run: RunRecord, background) -> np.ndarray:
    """``int Phi*(rho, m; background) dx`` per snapshot."""
    model = _gas_model(run)
    ref = _background_state(run, background)
    h = run.grid.spacing
    return np.array([
        np.sum(relative_mechanical_energy(model, EulerState(r, mm), ref)) * h
        for r, mm in zip(run.field("rho"), run.field("m"))
    ])


def energy_monitor(run: RunRecord, background, tol_rate: float = 1e-3) -> MonitorSeries:
    """``int Phi* dx + eps int int |u_x|^2`` with a nonincrease verdict.

    ``u_x`` is taken on cell faces so the dissipation matches the solver's
    viscous flux; time integration is trapezoidal over the snapshots.

    The verdict requires ``E(t) - tol_rate * E0 * t`` to be nonincreasing
    between snapshots (up to rounding).
    """
    if run.system != "navier_stokes":
        raise ValueError("energy monitor applies to Navier-Stokes runs")
    phi = relative_energy_series(run, background)
    rate = run.epsilon * np.sum(_face_velocity_gradient(run) ** 2, axis=1) * run.grid.spacing
    total = phi + _trapezoid_cumulative(run.times, rate)
    e0 = float(total[0])
    shifted = total - tol_rate * e0 * run.times
    slack = 1e-12 * max(abs(e0), 1e-300)
    rise = np.concatenate([[0.0], np.diff(shifted)])
    return MonitorSeries("energy", run.times, total, bound=e0, verdicts=rise <= slack,
                         meta={"E0": e0, "relative_energy": phi, "max_rise": float(np.max(rise))})


def density_derivative_monitor(run: RunRecord) -> tuple[MonitorSeries, MonitorSeries]:
    """``eps^2 int rho_x^2 / rho^3 dx`` per snapshot and cumulative
    ``eps int int rho^(gamma-3) rho_x^2``."""
    model = _gas_model(run)
    rho = run.field("rho")
    if np.any(rho <= VACUUM_FLOOR):
        raise ValueError("vacuum in run: density derivative monitor undefined")
    h = run.grid.spacing
    rx = _dx(rho, h, _is_periodic(run))
    eps = run.epsilon
    inst = eps**2 * np.sum(rx**2 / rho**3, axis=1) * h
    rate = eps * np.sum(rho ** (model.gamma - 3.0) * rx**2, axis=1) * h
    return (
        MonitorSeries("density_derivative", run.times, inst),
        MonitorSeries("density_derivative_cumulative", run.times, _trapezoid_cumulative(run.times, rate)),
    )


def higher_integrability_monitor(run: RunRecord, window: tuple[float, float]) -> MonitorSeries:
    """Cumulative ``int int_K (rho |u|^3 + rho^(gamma+theta) + rho^(gamma+1))``."""
    model = _gas_model(run)
    lo, hi = window
    g = run.grid
    if not (g.x_min <= lo < hi <= g.x_max):
        raise ValueError("window must lie inside the domain")
    # fractional overlap of each cell with the window
    faces = g.faces
    overlap = np.clip(np.minimum(faces[1:], hi) - np.maximum(faces[:-1], lo), 0.0, None)
    rho = np.maximum(run.field("rho"), 0.0)
    u = velocity(rho, run.field("m"))
    dens = rho * np.abs(u) ** 3 + rho ** (model.gamma + model.theta) + rho ** (model.gamma + 1.0)
    rate = dens @ overlap
    return MonitorSeries("higher_integrability", run.times, _trapezoid_cumulative(run.times, rate),
                         meta={"window": (lo, hi)})


# ---------------------------------------------------------------------------
# Entropy production and H^-1


def _pair_values(pair: EntropyPair, run: RunRecord):
    snaps = run.snapshots
    if run.field_names == ("u",):
        U = snaps[:, 0, :]
        return pair.eta(U), pair.q(U)
    return pair.eta(snaps[:, 0, :], snaps[:, 1, :]), pair.q(snaps[:, 0, :], snaps[:, 1, :])


def entropy_production(run: RunRecord, pair: EntropyPair, max_courant: float = 1.0) -> SpaceTimeField:
    """``mu = D_t eta + D_x q`` on consecutive snapshot pairs.

    ``D_t`` is the forward difference between snapshots and ``D_x`` the
    centred difference of the time-averaged flux, so ``mu`` lives on the
    half time levels and interior cells. Snapshot gaps larger than
    ``max_courant * dx / lambda`` are rejected.
    """
    if len(run.times) < 2:
        raise ValueError("entropy production needs at least two snapshots")
    eta, q = _pair_values(pair, run)
    dt = np.diff(run.times)
    h = run.grid.spacing
    speed = _run_speed(run)
    if speed > 0 and np.max(dt) * speed / h > max_courant:
        raise ValueError(
            f"snapshot spacing {np.max(dt):.3g} too coarse for dx = {h:.3g}; save snapshots more often"
        )
    q_mid = 0.5 * (q[1:] + q[:-1])
    mu = (eta[1:, 1:-1] - eta[:-1, 1:-1]) / dt[:, None] + (q_mid[:, 2:] - q_mid[:, :-2]) / (2 * h)
    t_mid = 0.5 * (run.times[1:] + run.times[:-1])
    return SpaceTimeField(mu, t_mid, run.grid.centers[1:-1], meta={"dt": dt, "pair": pair.name})


def _run_speed(run: RunRecord) -> float:
    if run.field_names == ("u",):
        return float(np.max(np.abs(run.model.df(run.snapshots[:, 0, :]))))
    model = _gas_model(run)
    rho = np.maximum(run.field("rho"), 0.0)
    return float(np.max(np.abs(velocity(rho, run.field("m"))) + _sound_speed_or_zero(model, rho)))


def h_minus_one_norm(values, spacing: tuple[float, float] = (1.0, 1.0)) -> float:
    """``||grad phi||_L2`` where ``-Laplace phi = mu`` with zero Dirichlet data.

    The samples are taken as interior nodes of a box whose edges sit one
    spacing beyond the outermost samples; the solve is spectral (DST-I,
    exact for the continuous Laplacian on sine modes).
    """
    mu = np.asarray(values, dtype=float)
    if mu.ndim != 2 or min(mu.shape) < 2:
        raise ValueError("H^-1 proxy needs a 2D window with at least 2 samples per axis")
    ny, nx = mu.shape
    ht, hx = spacing
    Lt, Lx = (ny + 1) * ht, (nx + 1) * hx
    coef = dstn(mu, type=1) / ((ny + 1) * (nx + 1))
    kt = np.pi * np.arange(1, ny + 1) / Lt
    kx = np.pi * np.arange(1, nx + 1) / Lx
    lam = kt[:, None] ** 2 + kx[None, :] ** 2
    return float(np.sqrt(np.sum(coef**2 / lam) * Lt * Lx / 4.0))


def l2_norm(values, spacing: tuple[float, float] = (1.0, 1.0)) -> float:
    return float(np.sqrt(np.sum(np.asarray(values, dtype=float) ** 2) * spacing[0] * spacing[1]))


# ---------------------------------------------------------------------------
# Spherical runs


@dataclass
class ConcentrationProfile:
    """Mass inside radius ``r0``: ``mass[k, i]`` at snapshot ``k`` and radius ``radii[i]``."""

    radii: np.ndarray
    times: np.ndarray
    mass: np.ndarray

    @property
    def sup(self) -> np.ndarray:
        return self.mass.max(axis=0)


def concentration_profile(run: RunRecord, radii: Sequence[float]) -> ConcentrationProfile:
    """``M(r0) = int_a^r0 rho r^(d-1) dr`` with exact integration of cell values."""
    if run.system != "spherical":
        raise ValueError("concentration profile needs a spherical run")
    d = run.meta["dim"]
    g = run.grid
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < g.x_min) or np.any(radii > g.x_max):
        raise ValueError("radii must lie in [a(eps), b(eps)]")
    lo = g.faces[:-1]
    hi_f = g.faces[1:]
    top = np.minimum(hi_f[None, :], radii[:, None])
    weight = np.clip(top**d - lo[None, :] ** d, 0.0, None) / d
    mass = run.field("rho") @ weight.T
    return ConcentrationProfile(radii, run.times.copy(), mass)


def spherical_energy_monitor(run: RunRecord) -> MonitorSeries:
    """Relative energy ``int Phi*(rho, m; rho_bar, 0) r^(d-1) dr`` per snapshot."""
    if run.system != "spherical":
        raise ValueError("spherical energy monitor needs a spherical run")
    bc: SphericalBC = run.meta["bc"]
    model = _gas_model(run)
    d = run.meta["dim"]
    g = run.grid
    shell = (g.faces[1:] ** d - g.faces[:-1] ** d) / d
    ref = EulerState(np.full(g.n_cells, bc.rho_bar_eps), np.zeros(g.n_cells))
    vals = np.array([
        relative_mechanical_energy(model, EulerState(r, mm), ref) @ shell
        for r, mm in zip(run.field("rho"), run.field("m"))
    ])
    return MonitorSeries("spherical_energy", run.times, vals)


def total_energy(model: GasModel, rho, m, weight) -> float:
    rho = np.asarray(rho, dtype=float)
    u = velocity(rho, m)
    return float(np.sum((0.5 * rho * u**2 + rho * internal_energy(model, np.maximum(rho, 0))) * weight))


# ---------------------------------------------------------------------------
# Sweep summaries


def uniform_bound_verdict(values: Sequence[float], factor: float = 2.0) -> bool:
    """``max <= factor * median``: the numeric stand-in for an eps-independent constant."""
    v = np.asarray(values, dtype=float)
    return bool(np.max(v) <= factor * np.median(v))


def trend_slope(epsilons: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``values`` against ``log eps``."""
    return float(np.polyfit(np.log(np.asarray(epsilons, dtype=float)), np.asarray(values, float), 1)[0])


def trend_arrow(epsilons: Sequence[float], values: Sequence[float], rel_tol: float = 1e-9) -> str:
    """Direction of change as eps decreases: ``↓``, ``↑`` or ``flat``."""
    v = np.asarray(values, dtype=float)
    slope = trend_slope(epsilons, v)
    if abs(slope) <= rel_tol * max(np.max(np.abs(v)), 1e-300):
        return "flat"
    # eps decreasing means log eps decreasing: positive slope => values drop
    return "↓" if slope > 0 else "↑"


def observed_order(sizes: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log error`` against ``log size``."""
    return float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])


def strictly_decreasing(values: Sequence[float]) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))


def sweep_table(path, epsilons: Sequence[float], columns: Mapping[str, Sequence[float]]) -> Path:
    """Wide CSV ``epsilon,<column names>`` keyed by eps."""
    header = ["epsilon", *columns]
    rows = zip(epsilons, *columns.values())
    return write_csv(path, header, rows)

