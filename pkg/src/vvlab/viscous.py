"""Explicit solvers for the viscous systems.

Four systems share one finite-volume kernel (central fluxes, one ghost cell
per side, SSP-RK2 in time):

* ``scalar``            U_t + F(U)_x = eps U_xx
* ``euler_artificial``  identity viscosity on both density and momentum
* ``navier_stokes``     viscosity eps u_xx on the momentum only
* ``spherical``         radial system with geometric sources, p = delta rho^2 + kappa rho^gamma,
                        inner wall (rho_r, m) = (0, 0), outer state (rho_bar, 0)

With cell Peclet number ``lambda_max*dx/eps <= 2`` and the default time step
the scalar scheme is a convex combination of neighbouring values, so the
maximum principle and TV monotonicity hold to rounding; for the artificial
viscosity Euler system the same argument (a Lax-Friedrichs average) keeps
the Riemann-invariant rectangle invariant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import VACUUM_FLOOR, EulerState, Grid1D, RunRecord, velocity
from .entropy import ScalarFlux
from .gas import (
    GasModel,
    _sound_speed_or_zero,
    invariants_of_state,
    pressure,
)

log = logging.getLogger(__name__)

SYSTEM_TAGS = ("scalar", "euler_artificial", "navier_stokes", "spherical")


class SolverBreakdown(RuntimeError):
    """Raised when positivity fails where the system requires it.

    ``record`` holds the trajectory up to the last valid state.
    """

    def __init__(self, message: str, t: float, state, record: RunRecord | None = None):
        super().__init__(message)
        self.t = t
        self.state = state
        self.record = record


@dataclass(frozen=True)
class SystemSpec:
    tag: str
    flux: ScalarFlux | None = None
    model: GasModel | None = None
    dim: int | None = None

    def __post_init__(self):
        if self.tag not in SYSTEM_TAGS:
            raise ValueError(f"unknown system tag {self.tag!r}")
        if self.tag == "scalar":
            if self.flux is None:
                raise ValueError("scalar system needs a flux")
        elif self.model is None:
            raise ValueError(f"{self.tag} system needs a GasModel")
        if self.tag == "spherical":
            if self.dim is None or int(self.dim) != self.dim or self.dim < 2:
                raise ValueError("spherical system needs an integer dimension d >= 2")

    @classmethod
    def scalar(cls, flux: ScalarFlux) -> "SystemSpec":
        return cls("scalar", flux=flux)

    @classmethod
    def euler(cls, model: GasModel) -> "SystemSpec":
        return cls("euler_artificial", model=model)

    @classmethod
    def navier_stokes(cls, model: GasModel) -> "SystemSpec":
        return cls("navier_stokes", model=model)

    @classmethod
    def spherical(cls, model: GasModel, dim: int) -> "SystemSpec":
        return cls("spherical", model=model, dim=dim)

    @property
    def field_names(self) -> tuple[str, ...]:
        return ("u",) if self.tag == "scalar" else ("rho", "m")

    @property
    def n_fields(self) -> int:
        return len(self.field_names)

    @property
    def requires_positive_density(self) -> bool:
        return self.tag in ("navier_stokes", "spherical")


# ---------------------------------------------------------------------------
# Boundary conditions


@dataclass(frozen=True)
class LineBC:
    """Boundary data for the line systems.

    ``kind`` is ``periodic``, ``dirichlet`` (ghost cells hold the given far-field
    states) or ``outflow`` (zero gradient). Far-field states are scalars for
    the scalar law and ``(rho, m)`` pairs for gas systems.
    """

    kind: str = "outflow"
    left: object = None
    right: object = None

    def __post_init__(self):
        if self.kind not in ("periodic", "dirichlet", "outflow"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "dirichlet" and (self.left is None or self.right is None):
            raise ValueError("dirichlet boundary needs left and right states")

    @classmethod
    def periodic(cls) -> "LineBC":
        return cls("periodic")

    @classmethod
    def dirichlet(cls, left, right) -> "LineBC":
        return cls("dirichlet", left, right)


@dataclass(frozen=True)
class SphericalBC:
    a_eps: float
    b_eps: float
    rho_bar_eps: float
    delta_eps: float = 0.0

    def __post_init__(self):
        if not 0 < self.a_eps < self.b_eps:
            raise ValueError("need 0 < a(eps) < b(eps)")
        if not self.rho_bar_eps > 0:
            raise ValueError("outer density must be positive")
        if self.delta_eps < 0:
            raise ValueError("delta(eps) must be nonnegative")

    def grid(self, n_cells: int) -> Grid1D:
        return Grid1D(self.a_eps, self.b_eps, n_cells)


@dataclass(frozen=True)
class SphericalSchedule:
    """``a = c_a eps**p_a``, ``b = c_b eps**(-p_b)``, ``rho_bar = c_rho eps**p_rho``,
    ``delta = c_delta eps**p_delta``."""

    c_a: float = 1.0
    c_b: float = 1.0
    c_rho: float = 1.0
    c_delta: float = 1.0
    p_a: float = 1.0
    p_b: float = 1.0
    p_rho: float = 1.0
    p_delta: float = 1.0

    def __call__(self, eps: float) -> SphericalBC:
        return SphericalBC(
            a_eps=self.c_a * eps**self.p_a,
            b_eps=self.c_b * eps ** (-self.p_b),
            rho_bar_eps=self.c_rho * eps**self.p_rho,
            delta_eps=self.c_delta * eps**self.p_delta,
        )


def _line_ghost(value, spec: SystemSpec):
    if spec.tag == "scalar":
        return np.array([float(value)])
    return np.asarray(value, dtype=float).reshape(2)


def apply_boundary(spec: SystemSpec, state, bc) -> np.ndarray:
    """Return the state padded with one ghost cell per side, shape ``(n_fields, n + 2)``."""
    U = _as_array(spec, state)
    if spec.tag == "spherical":
        if not isinstance(bc, SphericalBC):
            raise TypeError("spherical system needs a SphericalBC")
        left = np.array([U[0, 0], -U[1, 0]])
        right = np.array([bc.rho_bar_eps, 0.0])
    else:
        if isinstance(bc, SphericalBC):
            raise TypeError(f"{spec.tag} system cannot use a SphericalBC")
        bc = bc or LineBC()
        if bc.kind == "periodic":
            left, right = U[:, -1], U[:, 0]
        elif bc.kind == "dirichlet":
            left, right = _line_ghost(bc.left, spec), _line_ghost(bc.right, spec)
        else:
            left, right = U[:, 0], U[:, -1]
    return np.concatenate([left[:, None], U, right[:, None]], axis=1)


def _as_array(spec: SystemSpec, state) -> np.ndarray:
    if isinstance(state, EulerState):
        return state.as_array()
    U = np.asarray(state, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if U.shape[0] != spec.n_fields:
        raise ValueError(f"{spec.tag} state needs {spec.n_fields} fields")
    return U


def _effective_model(spec: SystemSpec, bc) -> GasModel:
    if spec.tag == "spherical" and isinstance(bc, SphericalBC) and bc.delta_eps:
        return spec.model.with_delta(spec.model.delta + bc.delta_eps)
    return spec.model


# ---------------------------------------------------------------------------
# Right-hand sides


def viscous_rhs(spec: SystemSpec, state, eps: float, grid: Grid1D, bc=None) -> np.ndarray:
    """Semi-discrete tendency, shape ``(n_fields, n_cells)``."""
    if not eps > 0:
        raise ValueError("viscosity must be positive")
    U = _as_array(spec, state)
    G = apply_boundary(spec, U, bc)
    dx = grid.spacing
    if spec.tag == "scalar":
        F = spec.flux.f(G[0])
        face = 0.5 * (F[:-1] + F[1:]) - eps * (G[0, 1:] - G[0, :-1]) / dx
        return -(face[1:] - face[:-1])[None, :] / dx

    model = _effective_model(spec, bc)
    rho, m = G
    if spec.requires_positive_density and np.any(U[0] <= VACUUM_FLOOR):
        j = int(np.argmin(U[0]))
        raise SolverBreakdown(
            f"density {U[0, j]:.3e} <= floor at cell {j} ({spec.tag})", np.nan, U
        )
    u = velocity(rho, m)
    p = pressure(model, np.maximum(rho, 0.0))

    if spec.tag == "euler_artificial":
        F0, F1 = m, m * u + p
        f0 = 0.5 * (F0[:-1] + F0[1:]) - eps * (rho[1:] - rho[:-1]) / dx
        f1 = 0.5 * (F1[:-1] + F1[1:]) - eps * (m[1:] - m[:-1]) / dx
        return -np.stack([f0[1:] - f0[:-1], f1[1:] - f1[:-1]]) / dx

    if spec.tag == "navier_stokes":
        F1 = m * u + p
        f0 = 0.5 * (m[:-1] + m[1:])
        f1 = 0.5 * (F1[:-1] + F1[1:]) - eps * (u[1:] - u[:-1]) / dx
        return -np.stack([f0[1:] - f0[:-1], f1[1:] - f1[:-1]]) / dx

    # spherical: weighted conservative form for mass and convective momentum
    d = spec.dim
    r_face = grid.faces
    area = r_face ** (d - 1)
    vol = (r_face[1:] ** d - r_face[:-1] ** d) / (d * dx)
    m_face = 0.5 * (m[:-1] + m[1:])
    rho_face = 0.5 * (rho[:-1] + rho[1:])
    mass_flux = area * (m_face - eps * (rho[1:] - rho[:-1]) / dx)
    conv = area * np.divide(m_face**2, rho_face, out=np.zeros_like(m_face), where=rho_face > 0)
    grad_p = (p[2:] - p[:-2]) / (2 * dx)
    # eps (m_r + (d-1) m / r)_r on faces
    visc = (m[1:] - m[:-1]) / dx + (d - 1) / r_face * m_face
    drho = -(mass_flux[1:] - mass_flux[:-1]) / (dx * vol)
    dm = -(conv[1:] - conv[:-1]) / (dx * vol) - grad_p + eps * (visc[1:] - visc[:-1]) / dx
    return np.stack([drho, dm])


def max_speed(spec: SystemSpec, state, bc=None) -> float:
    U = _as_array(spec, state)
    if spec.tag == "scalar":
        return float(np.max(np.abs(spec.flux.df(U[0]))))
    model = _effective_model(spec, bc)
    rho = np.maximum(U[0], 0.0)
    return float(np.max(np.abs(velocity(rho, U[1])) + _sound_speed_or_zero(model, rho)))


def diffusion_factor(spec: SystemSpec, state, grid: Grid1D, bc=None) -> float:
    """Largest effective diffusion coefficient per unit eps."""
    U = _as_array(spec, state)
    if spec.tag == "navier_stokes":
        return float(1.0 / np.min(U[0]))
    if spec.tag == "spherical":
        a = grid.x_min
        return 1.0 + (spec.dim - 1) * grid.spacing**2 / (2.0 * a * a)
    return 1.0


def stable_dt(
    spec: SystemSpec, state, eps: float, grid: Grid1D, cfl_h: float = 0.4, cfl_p: float = 0.4, bc=None
) -> float:
    """``min(cfl_h dx / lambda_max, cfl_p dx**2 / (2 eps d_max))``."""
    if not (cfl_h > 0 and cfl_p > 0):
        raise ValueError("safety factors must be positive")
    lam = max_speed(spec, state, bc)
    if not np.isfinite(lam):
        raise ValueError("non-finite characteristic speed")
    dx = grid.spacing
    d_max = diffusion_factor(spec, state, grid, bc)
    dt_h = cfl_h * dx / lam if lam > 0 else np.inf
    dt_p = cfl_p * dx * dx / (2.0 * eps * d_max)
    dt = min(dt_h, dt_p)
    if spec.tag == "spherical":
        dt = min(dt, cfl_h * grid.x_min / ((spec.dim - 1) * max(lam, 1e-300)))
    return float(dt)


def _restore(spec: SystemSpec, U: np.ndarray) -> np.ndarray:
    if spec.tag == "scalar":
        return U
    if not np.all(np.isfinite(U)):
        raise SolverBreakdown("non-finite state", np.nan, U)
    if spec.tag == "euler_artificial":
        vac = U[0] < VACUUM_FLOOR
        if np.any(U[0] < -1e-10):
            raise SolverBreakdown(f"negative density {U[0].min():.3e}", np.nan, U)
        U = U.copy()
        U[0, vac] = 0.0
        U[1, vac] = 0.0
    return U


def step(spec: SystemSpec, state, dt: float, eps: float, grid: Grid1D, bc=None) -> np.ndarray:
    """One SSP-RK2 (Heun) step; returns the new state array."""
    U = _as_array(spec, state)
    U1 = _restore(spec, U + dt * viscous_rhs(spec, U, eps, grid, bc))
    U2 = 0.5 * U + 0.5 * (U1 + dt * viscous_rhs(spec, U1, eps, grid, bc))
    return _restore(spec, U2)


# ---------------------------------------------------------------------------
# Driver


@dataclass(frozen=True)
class Schedule:
    """Snapshot schedule: explicit ``times`` or every ``every`` accepted steps.

    The initial and final times are always recorded.
    """

    t_final: float
    times: tuple[float, ...] | None = None
    every: int | None = None

    def __post_init__(self):
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")
        if self.times is not None:
            ts = tuple(float(t) for t in self.times)
            if any(t < 0 or t > self.t_final for t in ts):
                raise ValueError("snapshot times must lie in [0, t_final]")
            object.__setattr__(self, "times", ts)
        if self.every is not None and self.every < 1:
            raise ValueError("every must be >= 1")

    @classmethod
    def uniform(cls, t_final: float, count: int) -> "Schedule":
        return cls(t_final, times=tuple(np.linspace(0.0, t_final, count + 1)[1:]))

    def targets(self) -> list[float]:
        ts = sorted(set(self.times or ()) | {self.t_final})
        return [t for t in ts if t > 0]


def _step_monitors(spec: SystemSpec, U: np.ndarray, grid: Grid1D, bc) -> dict[str, float]:
    out = {}
    for name, f in zip(spec.field_names, U):
        out[f"{name}_min"] = float(f.min())
        out[f"{name}_max"] = float(f.max())
        out[f"{name}_tv"] = float(np.sum(np.abs(np.diff(f))))
        out[f"{name}_mass"] = float(np.sum(f) * grid.spacing)
    if spec.tag != "scalar":
        model = _effective_model(spec, bc)
        live = U[0] > VACUUM_FLOOR
        if np.any(live):
            w, z = invariants_of_state(model, U[0, live], U[1, live])
            out["w_max"] = float(w.max())
            out["z_min"] = float(z.min())
        else:
            out["w_max"] = out["z_min"] = 0.0
    return out


def solve(
    spec: SystemSpec,
    initial,
    eps: float,
    grid: Grid1D,
    schedule: Schedule | float,
    bc=None,
    *,
    cfl_h: float = 0.4,
    cfl_p: float = 0.4,
    max_steps: int = 10_000_000,
    meta: dict | None = None,
) -> RunRecord:
    """Integrate to ``schedule.t_final`` and return the trajectory.

    Snapshots land exactly on the scheduled times. Per-step monitors (min,
    max, total variation and mass of every field; extreme Riemann invariants
    for gas systems) are recorded for every accepted step.
    """
    if not isinstance(schedule, Schedule):
        schedule = Schedule(float(schedule))
    U = _as_array(spec, initial).copy()
    if U.shape[1] != grid.n_cells:
        raise ValueError("initial data does not match the grid")
    U = _restore(spec, U)
    if spec.requires_positive_density and np.any(U[0] <= VACUUM_FLOOR):
        raise SolverBreakdown("initial density is not positive", 0.0, U)

    lam0 = max_speed(spec, U, bc)
    peclet = lam0 * grid.spacing / eps
    if peclet > 2.0:
        log.warning("cell Peclet number %.3g exceeds 2; central scheme may oscillate", peclet)

    t = 0.0
    times = [0.0]
    snaps = [U.copy()]
    mon = {k: [v] for k, v in _step_monitors(spec, U, grid, bc).items()}
    mon["t"] = [0.0]
    mon["dt"] = [0.0]
    targets = schedule.targets()
    k_target = 0
    n_steps = 0
    since_snap = 0

    def record(**extra):
        return RunRecord(
            system=spec.tag,
            epsilon=float(eps),
            grid=grid,
            field_names=spec.field_names,
            times=np.array(times),
            snapshots=np.array(snaps),
            monitors={k: np.array(v) for k, v in mon.items()},
            model=spec.model if spec.tag != "scalar" else spec.flux,
            meta={
                "cell_peclet": peclet,
                "bc": bc,
                "dim": spec.dim,
                "n_steps": n_steps,
                "cfl": (cfl_h, cfl_p),
                **(meta or {}),
                **extra,
            },
        )

    while k_target < len(targets):
        target = targets[k_target]
        dt = stable_dt(spec, U, eps, grid, cfl_h, cfl_p, bc)
        hit = False
        if t + dt >= target - 1e-14 * max(1.0, target):
            dt = target - t
            hit = True
        elif t + 2 * dt > target:
            dt = 0.5 * (target - t)
        try:
            U_new = step(spec, U, dt, eps, grid, bc)
        except SolverBreakdown as exc:
            raise SolverBreakdown(
                f"{exc} at t={t:.6g}", t, U, record(breakdown=str(exc), t_breakdown=t)
            ) from None
        n_steps += 1
        since_snap += 1
        U = U_new
        t = target if hit else t + dt
        mon["t"].append(t)
        mon["dt"].append(dt)
        for key, v in _step_monitors(spec, U, grid, bc).items():
            mon[key].append(v)
        if hit:
            k_target += 1
        if hit or (schedule.every is not None and since_snap >= schedule.every):
            times.append(t)
            snaps.append(U.copy())
            since_snap = 0
        if n_steps >= max_steps:
            raise SolverBreakdown("step budget exhausted", t, U, record(breakdown="max_steps"))
    return record()


# ---------------------------------------------------------------------------
# Background profiles and data helpers


def smooth_transition(x, center: float = 0.0, half_width: float = 5.0):
    """Monotone C-infinity ramp from 0 to 1, constant outside ``[c - L0, c + L0]``.

    ``(1 + tanh(tan(pi xi / 2))) / 2`` with ``xi = (x - c) / L0``.
    """
    xi = (np.asarray(x, dtype=float) - center) / half_width
    inside = np.abs(xi) < 1
    arg = np.tan(0.5 * np.pi * np.where(inside, xi, 0.0))
    return np.where(inside, 0.5 * (1.0 + np.tanh(arg)), np.where(xi >= 1, 1.0, 0.0))


@dataclass(frozen=True)
class BackgroundProfile:
    rho_minus: float
    u_minus: float
    rho_plus: float
    u_plus: float
    half_width: float = 5.0
    center: float = 0.0

    def __post_init__(self):
        if not (self.rho_minus > 0 and self.rho_plus > 0):
            raise ValueError("end-state densities must be positive")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def __call__(self, x):
        s = smooth_transition(x, self.center, self.half_width)
        rho = self.rho_minus + (self.rho_plus - self.rho_minus) * s
        u = self.u_minus + (self.u_plus - self.u_minus) * s
        return rho, u

    def state(self, x) -> EulerState:
        rho, u = self(x)
        return EulerState(rho, rho * u)

    @property
    def end_states(self):
        return (
            (self.rho_minus, self.rho_minus * self.u_minus),
            (self.rho_plus, self.rho_plus * self.u_plus),
        )


def mollified_step(x, left: float, right: float, interface: float, width: float):
    """Riemann step smoothed by ``tanh`` over ``width`` (data converging as width -> 0)."""
    x = np.asarray(x, dtype=float)
    return left + (right - left) * 0.5 * (1.0 + np.tanh((x - interface) / width))


def burgers_traveling_wave(x, t, u_left: float, u_right: float, eps: float, x0: float = 0.0):
    """Exact viscous Burgers shock profile moving at ``(u_left + u_right)/2``."""
    s = 0.5 * (u_left + u_right)
    jump = u_left - u_right
    xi = np.asarray(x, dtype=float) - x0 - s * t
    return s - 0.5 * jump * np.tanh(jump * xi / (4.0 * eps))


def initial_array(spec: SystemSpec, *fields: Sequence[float]) -> np.ndarray:
    return _as_array(spec, np.stack([np.asarray(f, dtype=float) for f in fields]))
