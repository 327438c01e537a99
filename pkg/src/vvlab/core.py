"""Grids, states, run records and the basic norms shared by every module.

Fields are plain NumPy arrays indexed by cell. Gas states carry density and
momentum side by side in an :class:`EulerState`.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

VACUUM_FLOOR = 1e-13


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centred grid on ``[x_min, x_max]``."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min={self.x_min} must be < x_max={self.x_max}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ValueError(f"n_cells must be an integer >= 4, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.spacing

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.spacing

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_cells": self.n_cells}


def make_grid(x_min: float, x_max: float, n_cells: int) -> Grid1D:
    return Grid1D(float(x_min), float(x_max), n_cells)


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centred grid on a rectangle, with per-axis periodic flags."""

    x_min: float
    x_max: float
    nx: int
    y_min: float
    y_max: float
    ny: int
    periodic_x: bool = False
    periodic_y: bool = False

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("grid bounds must be ordered")
        if self.nx < 4 or self.ny < 4:
            raise ValueError("grid counts must be >= 4")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def spacing(self) -> tuple[float, float]:
        return (self.dx, self.dy)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates, ``indexing="ij"`` (first axis is x)."""
        x = self.x_min + (np.arange(self.nx) + 0.5) * self.dx
        y = self.y_min + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class EulerState:
    """Density and momentum on a 1D grid.

    Cells with ``rho`` below ``VACUUM_FLOOR`` are vacuum: both fields are
    exactly zero there.
    """

    rho: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        self.rho = np.array(self.rho, dtype=float)
        self.m = np.array(self.m, dtype=float)
        if self.rho.shape != self.m.shape:
            raise ValueError("rho and m must have the same shape")
        if not (np.all(np.isfinite(self.rho)) and np.all(np.isfinite(self.m))):
            raise ValueError("state contains non-finite values")

    def __iter__(self):
        return iter((self.rho, self.m))

    @property
    def u(self) -> np.ndarray:
        return velocity(self.rho, self.m)

    def floored(self, floor: float = VACUUM_FLOOR) -> "EulerState":
        return EulerState(*apply_vacuum_floor(self.rho, self.m, floor))

    def check(self, tol: float = 0.0) -> None:
        if np.any(self.rho < -tol):
            raise ValueError(f"negative density {self.rho.min():.3e}")
        if np.any((self.rho == 0) & (self.m != 0)):
            raise ValueError("momentum must vanish in vacuum cells")

    def as_array(self) -> np.ndarray:
        return np.stack([self.rho, self.m])


def velocity(rho, m):
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    out = np.zeros(np.broadcast(rho, m).shape)
    pos = rho > 0
    np.divide(m, rho, out=out, where=pos)
    return out


def apply_vacuum_floor(rho, m, floor: float = VACUUM_FLOOR):
    rho = np.array(rho, dtype=float)
    m = np.array(m, dtype=float)
    vac = rho < floor
    rho[vac] = 0.0
    m[vac] = 0.0
    return rho, m


@dataclass
class RunRecord:
    """Trajectory of one viscous (or reference) run.

    ``snapshots`` has shape ``(n_snapshots, n_fields, n_cells)``. ``monitors``
    maps names to per-accepted-step arrays; ``monitors["t"]`` holds the step
    times (the initial time included).
    """

    system: str
    epsilon: float
    grid: Grid1D
    field_names: tuple[str, ...]
    times: np.ndarray
    snapshots: np.ndarray
    monitors: dict[str, np.ndarray] = field(default_factory=dict)
    model: Any = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.snapshots = np.asarray(self.snapshots, dtype=float)
        if self.snapshots.ndim != 3 or self.snapshots.shape[0] != self.times.size:
            raise ValueError("snapshots must have shape (n_times, n_fields, n_cells)")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")

    def field(self, name: str) -> np.ndarray:
        """All snapshots of one field, shape ``(n_times, n_cells)``."""
        return self.snapshots[:, self.field_names.index(name), :]

    def state(self, k: int = -1):
        snap = self.snapshots[k]
        if self.field_names == ("rho", "m"):
            return EulerState(snap[0], snap[1])
        return snap[0].copy()

    @property
    def final(self):
        return self.state(-1)


@dataclass(frozen=True)
class SweepSpec:
    """Strictly decreasing list of viscosities sharing one configuration."""

    epsilons: tuple[float, ...]
    config: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ValueError("sweep needs at least one epsilon")
        if any(e <= 0 for e in eps):
            raise ValueError("sweep epsilons must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("sweep epsilons must be strictly decreasing")
        object.__setattr__(self, "epsilons", eps)


# ---------------------------------------------------------------------------
# Initial data


_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in (
        "sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "cosh", "sinh",
        "arctan", "abs", "where", "maximum", "minimum", "heaviside", "sign",
        "pi", "e",
    )
}
_EXPR_NAMESPACE["__builtins__"] = {}


def evaluate_expression(expr: str, x: np.ndarray, **params) -> np.ndarray:
    """Evaluate a NumPy expression in ``x`` with a restricted namespace."""
    scope = dict(_EXPR_NAMESPACE)
    scope.update(params)
    scope["x"] = x
    values = eval(compile(expr, "<initial-data>", "eval"), scope)  # noqa: S307
    return np.broadcast_to(np.asarray(values, dtype=float), x.shape).copy()


def project_initial_data(spec, grid: Grid1D) -> np.ndarray:
    """Sample initial data at cell midpoints.

    ``spec`` may be a number (constant), a callable of ``x``, an array-like of
    tabulated samples, or a dict with ``type`` one of ``constant``,
    ``riemann``, ``expression``, ``table``::

        {"type": "riemann", "left": 1.0, "right": 0.0, "interface": 0.5}
        {"type": "expression", "expr": "sin(2*pi*x)"}
        {"type": "table", "values": [...], "x": [...]}   # x optional

    Tabulated samples without ``x`` are taken as equispaced nodes spanning
    the domain and interpolated linearly.
    """
    x = grid.centers
    if callable(spec):
        values = np.asarray(spec(x), dtype=float)
        values = np.broadcast_to(values, x.shape).copy()
    elif isinstance(spec, Mapping):
        kind = spec.get("type")
        if kind == "constant":
            values = np.full(grid.n_cells, float(spec["value"]))
        elif kind == "riemann":
            x0 = float(spec.get("interface", 0.5 * (grid.x_min + grid.x_max)))
            values = np.where(x < x0, float(spec["left"]), float(spec["right"]))
        elif kind == "expression":
            values = evaluate_expression(spec["expr"], x, **spec.get("params", {}))
        elif kind == "table":
            values = _from_table(spec["values"], spec.get("x"), grid)
        else:
            raise ValueError(f"unknown initial-data type {kind!r}")
    elif np.isscalar(spec):
        values = np.full(grid.n_cells, float(spec))
    else:
        values = _from_table(spec, None, grid)
    if not np.all(np.isfinite(values)):
        raise ValueError("initial data evaluated to non-finite values")
    return values


def _from_table(values, xs, grid: Grid1D) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < grid.n_cells:
        raise ValueError(
            f"table has {values.size} samples, grid needs at least {grid.n_cells}"
        )
    if xs is None:
        xs = np.linspace(grid.x_min, grid.x_max, values.size)
    return np.interp(grid.centers, np.asarray(xs, dtype=float), values)


# ---------------------------------------------------------------------------
# Norms and averages


def l1_distance(f, g, grid: Grid1D) -> float:
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape or f.shape[-1] != grid.n_cells:
        raise ValueError(f"fields {f.shape} and {g.shape} do not share the grid")
    return float(grid.spacing * np.sum(np.abs(f - g)))


def _box_average_1d(a: np.ndarray, radius: int, axis: int, periodic: bool) -> np.ndarray:
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    if periodic:
        r = min(radius, n)
        window = 2 * r + 1
        if window >= n:
            out = np.broadcast_to(a.mean(axis=-1, keepdims=True), a.shape).copy()
        else:
            padded = np.concatenate([a[..., n - r:], a, a[..., :r]], axis=-1)
            c = np.cumsum(padded, axis=-1)
            c = np.concatenate([np.zeros(c.shape[:-1] + (1,)), c], axis=-1)
            out = (c[..., window:] - c[..., :-window]) / window
    else:
        c = np.cumsum(a, axis=-1)
        c = np.concatenate([np.zeros(c.shape[:-1] + (1,)), c], axis=-1)
        j = np.arange(n)
        lo = np.clip(j - radius, 0, n)
        hi = np.clip(j + radius + 1, 0, n)
        out = (c[..., hi] - c[..., lo]) / (hi - lo)
    return np.moveaxis(out, -1, axis)


def local_average(values, window_radius: int, periodic=False) -> np.ndarray:
    """Moving box average over ``2*window_radius + 1`` cells along every axis.

    Non-periodic axes clip the window at the boundary (the average is over
    the cells that exist). ``periodic`` may be a bool or one flag per axis.
    """
    a = np.asarray(values, dtype=float)
    r = int(window_radius)
    if r < 1:
        raise ValueError("window_radius must be at least one cell")
    flags = [periodic] * a.ndim if np.isscalar(periodic) else list(periodic)
    out = a
    for axis in range(a.ndim):
        out = _box_average_1d(out, r, axis, bool(flags[axis]))
    return out


# ---------------------------------------------------------------------------
# Persistence


def format_float(v: float) -> str:
    return f"{float(v):.17g}"


def write_csv(path, header: Sequence[str], rows) -> Path:
    """Write rows with 17 significant digits; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else format_float(v) for v in row))
        buf.write("\n")
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return header, data.reshape(-1, len(header))


def snapshot_subset(n_times: int, max_times: int | None = None) -> np.ndarray:
    """Evenly strided snapshot indices, first and last always included."""
    if max_times is None or n_times <= max_times:
        return np.arange(n_times)
    return np.unique(np.round(np.linspace(0, n_times - 1, max_times)).astype(int))


def write_snapshots(run: RunRecord, path, max_times: int | None = None) -> Path:
    """Snapshot CSV with header ``t,x,<field names>``.

    ``max_times`` caps the number of time levels written (see
    :func:`snapshot_subset`); the record itself is untouched.
    """
    x = run.grid.centers
    keep = snapshot_subset(run.times.size, max_times)
    n_t, n_x = keep.size, x.size
    table = np.column_stack([
        np.repeat(run.times[keep], n_x),
        np.tile(x, n_t),
        run.snapshots[keep].transpose(0, 2, 1).reshape(n_t * n_x, -1),
    ])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # same 17-digit formatting as write_csv
    with open(path, "w") as fh:
        fh.write(",".join(["t", "x", *run.field_names]) + "\n")
        np.savetxt(fh, table, fmt="%.17g", delimiter=",")
    return path


def read_snapshots(path) -> tuple[tuple[str, ...], np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_snapshots`: ``(field_names, times, x, snapshots)``."""
    header, data = read_csv(path)
    times = np.unique(data[:, 0])
    x = data[data[:, 0] == times[0], 1]
    snaps = data[:, 2:].reshape(times.size, x.size, -1).transpose(0, 2, 1)
    return tuple(header[2:]), times, x, snaps


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, payload: Mapping[str, Any], files: Sequence) -> dict:
    """JSON manifest: ``payload`` plus an inventory of files with SHA-256 hashes."""
    path = Path(path)
    inventory = [
        {"path": str(Path(f).relative_to(path.parent)), "sha256": file_sha256(f)}
        for f in files
    ]
    manifest = dict(payload)
    manifest["files"] = inventory
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return manifest


def verify_manifest(path) -> bool:
    path = Path(path)
    manifest = json.loads(path.read_text())
    for entry in manifest["files"]:
        f = path.parent / entry["path"]
        if not f.exists() or file_sha256(f) != entry["sha256"]:
            return False
    return True


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")

