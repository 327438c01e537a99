"""Compensated-compactness experiments.

Empirical Young measures are built per macrocell of the ``(t, x)`` snapshot
lattice: each fine cell contributes its state with weight proportional to
its space-time volume. Gas states are stored as conserved pairs ``(rho, m)``
so entropy pairs evaluate on them directly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import Grid2D, RunRecord, local_average, write_csv
from .diagnostics import h_minus_one_norm, l2_norm, strictly_decreasing, trend_arrow
from .entropy import EntropyPair

PRUNE_WEIGHT = 1e-12


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Probability measure with finitely many atoms.

    ``points`` has shape ``(n_atoms, dim)``. Duplicate atoms are merged and
    weights below ``1e-12`` pruned on construction.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(w) != len(pts):
            raise ValueError("one weight per support point")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if w.sum() <= 0:
            raise ValueError("measure has no mass")
        w = w / w.sum()
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        merged = np.bincount(inv.ravel(), weights=w, minlength=len(uniq))
        keep = merged >= PRUNE_WEIGHT
        merged = merged[keep]
        object.__setattr__(self, "points", uniq[keep])
        object.__setattr__(self, "weights", merged / merged.sum())

    @classmethod
    def dirac(cls, point) -> "EmpiricalMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), [1.0])

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_atoms(self) -> int:
        return len(self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def expect(self, fn: Callable) -> float:
        """``<nu, fn>`` where ``fn`` takes the state components as arguments."""
        vals = np.asarray(fn(*self.points.T), dtype=float)
        return float(self.weights @ vals)


def _pair_on(pair: EntropyPair, measure: EmpiricalMeasure):
    cols = measure.points.T
    return np.asarray(pair.eta(*cols), dtype=float), np.asarray(pair.q(*cols), dtype=float)


def commutation_residual(measure: EmpiricalMeasure, pair1: EntropyPair, pair2: EntropyPair) -> float:
    """``|<nu, eta1 q2 - q1 eta2> - (<eta1><q2> - <q1><eta2>)|``."""
    e1, q1 = _pair_on(pair1, measure)
    e2, q2 = _pair_on(pair2, measure)
    w = measure.weights
    lhs = w @ (e1 * q2 - q1 * e2)
    rhs = (w @ e1) * (w @ q2) - (w @ q1) * (w @ e2)
    return float(abs(lhs - rhs))


def diracness(measure: EmpiricalMeasure) -> float:
    """Trace of the covariance of the state under the measure."""
    centred = measure.points - measure.mean()
    return float(measure.weights @ np.sum(centred**2, axis=1))


# ---------------------------------------------------------------------------
# Young measures from runs


def _time_weights(times: np.ndarray) -> np.ndarray:
    """Trapezoid weights of the snapshot times (uniform for a single time)."""
    if len(times) == 1:
        return np.ones(1)
    dt = np.diff(times)
    w = np.zeros(len(times))
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _run_states(run: RunRecord) -> np.ndarray:
    """States with shape ``(n_t, n_x, dim)``."""
    return np.moveaxis(run.snapshots, 1, 2)


def empirical_young_measure(runs: Sequence[RunRecord], macrocell: tuple[int, int] = (8, 8)):
    """Per run, an array ``(n_macro_t, n_macro_x)`` of :class:`EmpiricalMeasure`.

    Macrocells are blocks of ``macrocell = (snapshots, cells)`` fine cells;
    trailing partial blocks are dropped.
    """
    mt, mx = macrocell
    if mt < 1 or mx < 1:
        raise ValueError("macrocell must contain at least one fine cell per axis")
    ref = runs[0]
    out = []
    for run in runs:
        if run.grid != ref.grid or not np.array_equal(run.times, ref.times):
            raise ValueError("runs must share grid and snapshot schedule")
        states = _run_states(run)
        nt, nx = states.shape[:2]
        if mt > nt or mx > nx:
            raise ValueError("macrocell larger than the snapshot lattice")
        tw = _time_weights(run.times)
        grid = np.empty((nt // mt, nx // mx), dtype=object)
        for i in range(nt // mt):
            for j in range(nx // mx):
                block = states[i * mt:(i + 1) * mt, j * mx:(j + 1) * mx]
                w = np.repeat(tw[i * mt:(i + 1) * mt], mx)
                if w.sum() <= 0:
                    w = np.ones_like(w)
                grid[i, j] = EmpiricalMeasure(block.reshape(-1, block.shape[-1]), w)
        out.append(grid)
    return out


@dataclass
class WeakContinuitySweep:
    epsilons: np.ndarray
    pair_names: list[tuple[str, str]]
    residuals: np.ndarray  # (n_eps, n_combos, n_macro_t, n_macro_x)
    diracness: np.ndarray  # (n_eps, n_macro_t, n_macro_x)
    verdicts: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> np.ndarray:
        if self.residuals.shape[1] == 0:
            return np.zeros(len(self.epsilons))
        return self.residuals.max(axis=(1, 2, 3))

    @property
    def mean_diracness(self) -> np.ndarray:
        return self.diracness.mean(axis=(1, 2))

    def rows(self):
        worst = self.residuals.max(axis=1) if self.residuals.shape[1] else np.zeros_like(self.diracness)
        for k, eps in enumerate(self.epsilons):
            for i, j in np.ndindex(self.diracness.shape[1:]):
                yield eps, i, j, worst[k, i, j], self.diracness[k, i, j]

    def to_csv(self, path) -> Path:
        return write_csv(path, ["epsilon", "macrocell_i", "macrocell_j", "residual", "diracness"], self.rows())


def weak_continuity_sweep(runs: Sequence[RunRecord], pairs: Sequence[EntropyPair],
                          macrocell: tuple[int, int] = (8, 8), min_runs: int = 4) -> WeakContinuitySweep:
    """Commutation residuals for every pair combination and diracness per macrocell."""
    if len(runs) < min_runs:
        raise ValueError(f"weak continuity sweep needs at least {min_runs} viscosities")
    eps = np.array([r.epsilon for r in runs])
    measures = empirical_young_measure(runs, macrocell)
    combos = list(itertools.combinations(range(len(pairs)), 2))
    shape = measures[0].shape
    res = np.zeros((len(runs), len(combos), *shape))
    dirac = np.zeros((len(runs), *shape))
    for k, grid in enumerate(measures):
        for i, j in np.ndindex(shape):
            nu = grid[i, j]
            dirac[k, i, j] = diracness(nu)
            for c, (a, b) in enumerate(combos):
                res[k, c, i, j] = commutation_residual(nu, pairs[a], pairs[b])
    report = WeakContinuitySweep(eps, [(pairs[a].name, pairs[b].name) for a, b in combos], res, dirac)
    report.verdicts = {
        "residual_trend": trend_arrow(eps, report.max_residual),
        "diracness_trend": trend_arrow(eps, report.mean_diracness),
        "diracness_decreasing": strictly_decreasing(report.mean_diracness),
        "residual_decreasing": strictly_decreasing(report.max_residual),
    }
    return report


# ---------------------------------------------------------------------------
# Div-curl experiments


@dataclass
class VectorFieldFamily:
    """Fields ``(2, nx, ny)`` on a shared periodic grid, one per eps (decreasing).

    ``wavelengths`` records the finest oscillation of each member (defaults to
    ``2 pi eps``) for the aliasing guard.
    """

    grid: Grid2D
    epsilons: Sequence[float]
    fields: Sequence[np.ndarray]
    wavelengths: Sequence[float] | None = None

    def __post_init__(self):
        self.epsilons = np.asarray(self.epsilons, dtype=float)
        if len(self.epsilons) == 0 or np.any(np.diff(self.epsilons) >= 0):
            raise ValueError("family epsilons must be strictly decreasing")
        self.fields = [np.asarray(f, dtype=float) for f in self.fields]
        if len(self.fields) != len(self.epsilons):
            raise ValueError("one field per epsilon")
        for f in self.fields:
            if f.shape != (2, *self.grid.shape):
                raise ValueError("fields must have shape (2, nx, ny) on the family grid")
        if self.wavelengths is None:
            self.wavelengths = 2 * np.pi * self.epsilons
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)

    @classmethod
    def from_function(cls, grid: Grid2D, epsilons: Sequence[float], fn: Callable, wavelengths=None):
        """``fn(x, y, eps) -> (f1, f2)`` evaluated on the grid mesh."""
        X, Y = grid.mesh()
        fields = [np.stack(np.broadcast_arrays(X, *fn(X, Y, e))[1:]).astype(float) for e in epsilons]
        return cls(grid, epsilons, fields, wavelengths)


def _periodic_diff(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * h)


def divergence(field2: np.ndarray, grid: Grid2D) -> np.ndarray:
    return _periodic_diff(field2[0], grid.dx, 0) + _periodic_diff(field2[1], grid.dy, 1)


def curl(field2: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Scalar curl ``d1 v2 - d2 v1``."""
    return _periodic_diff(field2[1], grid.dx, 0) - _periodic_diff(field2[0], grid.dy, 1)


def _block_means(f: np.ndarray, size: int) -> np.ndarray:
    nx, ny = f.shape
    bx, by = nx // size, ny // size
    return f[: bx * size, : by * size].reshape(bx, size, by, size).mean(axis=(1, 3))


@dataclass
class DivCurlReport:
    epsilons: np.ndarray
    div_proxy: np.ndarray
    curl_proxy: np.ndarray
    div_l2: np.ndarray
    curl_l2: np.ndarray
    gap: np.ndarray
    gap_fields: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)

    def rows(self):
        return zip(self.epsilons, self.div_proxy, self.curl_proxy, self.gap)

    def to_csv(self, path) -> Path:
        return write_csv(path, ["epsilon", "div_proxy", "curl_proxy", "gap"], self.rows())


def div_curl_experiment(u_family: VectorFieldFamily, v_family: VectorFieldFamily,
                        averaging_scale: int, macrocell: int | None = None,
                        compact_tol: float = 1e-6) -> DivCurlReport:
    """Weak continuity of ``u . v`` under div/curl control.

    Per eps: H^-1 proxies of ``div u`` and ``curl v`` (Dirichlet solve on the
    whole periodic box) with their L2 sizes, weak limits by a periodic
    moving average of radius ``averaging_scale`` cells, and the gap
    ``max over macrocells |mean(u.v) - mean(U.V)|``. The verdict checks that
    the gap tends to 0 exactly when both proxies are compact (tend to 0
    relative to the fields' size).
    """
    grid = u_family.grid
    if v_family.grid != grid:
        raise ValueError("families must share a grid")
    if not np.array_equal(u_family.epsilons, v_family.epsilons):
        raise ValueError("families must share the eps list")
    if not (grid.periodic_x and grid.periodic_y):
        raise ValueError("div-curl experiment needs a periodic grid")
    h_min = min(grid.dx, grid.dy)
    for fam in (u_family, v_family):
        if np.any(fam.wavelengths <= 4 * h_min):
            raise ValueError("aliasing: oscillation wavelength must exceed 4 fine cells")
    if averaging_scale < 1:
        raise ValueError("averaging scale must be at least one cell")
    block = macrocell or 2 * averaging_scale
    spacing = (grid.dx, grid.dy)
    out = {k: [] for k in ("div_proxy", "curl_proxy", "div_l2", "curl_l2", "gap")}
    gaps = []
    sizes = []
    for u, v in zip(u_family.fields, v_family.fields):
        du, cv = divergence(u, grid), curl(v, grid)
        sizes.append(1.0 + l2_norm(u[0], spacing) + l2_norm(u[1], spacing)
                     + l2_norm(v[0], spacing) + l2_norm(v[1], spacing))
        out["div_proxy"].append(h_minus_one_norm(du, spacing))
        out["curl_proxy"].append(h_minus_one_norm(cv, spacing))
        out["div_l2"].append(l2_norm(du, spacing))
        out["curl_l2"].append(l2_norm(cv, spacing))
        U = [local_average(c, averaging_scale, periodic=True) for c in u]
        V = [local_average(c, averaging_scale, periodic=True) for c in v]
        product = u[0] * v[0] + u[1] * v[1]
        limit = U[0] * V[0] + U[1] * V[1]
        g = np.abs(_block_means(product, block) - _block_means(limit, block))
        gaps.append(g)
        out["gap"].append(float(g.max()))
    rep = DivCurlReport(u_family.epsilons, *(np.array(out[k]) for k in
                        ("div_proxy", "curl_proxy", "div_l2", "curl_l2", "gap")), gap_fields=gaps)
    worst = max(rep.div_proxy[-1], rep.curl_proxy[-1])
    compact = bool(worst <= compact_tol * sizes[-1]) or (
        strictly_decreasing(rep.div_proxy) and strictly_decreasing(rep.curl_proxy)
        and worst <= 0.5 * max(rep.div_proxy[0], rep.curl_proxy[0])
    )
    gap_vanishing = bool(rep.gap[-1] <= 0.5 * rep.gap[0] or rep.gap[-1] <= 1e-2)
    rep.verdicts = {
        "proxies_compact": compact,
        "gap_vanishing": gap_vanishing,
        "consistent": compact == gap_vanishing,
        "gap_trend": trend_arrow(rep.epsilons, rep.gap),
    }
    return rep


def canonical_families(kind: str, grid: Grid2D, epsilons: Sequence[float]):
    """Reference ``(u, v)`` families for div-curl experiments.

    ``compliant``: ``u = (sin(y/eps), 0)`` is divergence free and
    ``v = (sin(x/eps), 0)`` is curl free, so ``u . v`` converges weakly to 0.
    ``violating``: ``u = v = (sin(x/eps), 0)``; ``u . v`` tends to 1/2 weakly
    while both weak limits vanish. ``constant``: ``u = v = (1, 2)``.
    """
    if kind == "compliant":
        u = VectorFieldFamily.from_function(grid, epsilons, lambda X, Y, e: (np.sin(Y / e), 0.0))
        v = VectorFieldFamily.from_function(grid, epsilons, lambda X, Y, e: (np.sin(X / e), 0.0))
    elif kind == "violating":
        u = VectorFieldFamily.from_function(grid, epsilons, lambda X, Y, e: (np.sin(X / e), 0.0))
        v = u
    elif kind == "constant":
        u = VectorFieldFamily.from_function(grid, epsilons, lambda X, Y, e: (1.0, 2.0))
        v = u
    else:
        raise ValueError(f"unknown canonical family {kind!r}")
    return u, v
