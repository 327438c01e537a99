"""Gauss-Codazzi(-Ricci) residuals and the Chaplygin-gas fluid formalism.

Conventions
-----------
* Surfaces: ``L, M, N`` are the second fundamental form divided by
  ``sqrt(det g)``; Codazzi then reads
  ``M_x - L_y = L G2_22 - 2 M G2_12 + N G2_11`` and
  ``N_x - M_y = -L G1_22 + 2 M G1_12 - N G1_11`` with ``Gk_ij`` the
  Christoffel symbols, and Gauss reads ``LN - M^2 = K``.
* Higher codimension: ``h[a, i, j] = <X_ij, N_a>`` and
  ``kappa[a, k, b] = <d_k N_b, N_a>``; the curvature tensor satisfies
  ``R[i, j, k, l] = sum_a h_ik h_jl - h_il h_jk`` (so ``R_1212 = K det g``).

Derivatives are second-order finite differences (one-sided at the two
outermost layers, which residual reports drop by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Grid2D

BOUNDARY_LAYERS = 2
SUBSONIC, SONIC, SUPERSONIC = 1, 0, -1
FLOW_TYPES = {SUBSONIC: "subsonic", SONIC: "sonic", SUPERSONIC: "supersonic"}


def _d(f, h: float, axis: int):
    return np.gradient(f, h, axis=axis, edge_order=2)


def interior(f, layers: int = BOUNDARY_LAYERS, n_axes: int = 2):
    """Drop ``layers`` nodes at each end of the trailing ``n_axes`` axes."""
    f = np.asarray(f)
    if layers == 0:
        return f
    idx = (Ellipsis,) + (slice(layers, -layers),) * n_axes
    return f[idx]


@dataclass
class MetricField:
    grid: Grid2D
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray

    def __post_init__(self):
        shape = self.grid.shape
        for name in ("g11", "g12", "g22"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), shape).copy()
            setattr(self, name, arr)
        if np.any(self.g11 <= 0) or np.any(self.det <= 0):
            raise ValueError("metric is degenerate or not positive definite")

    @property
    def det(self) -> np.ndarray:
        return self.g11 * self.g22 - self.g12**2

    def tensor(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g12, self.g22]])

    @classmethod
    def from_function(cls, grid: Grid2D, fn) -> "MetricField":
        X, Y = grid.mesh()
        return cls(grid, *fn(X, Y))


@dataclass
class SecondFormField:
    grid: Grid2D
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        shape = self.grid.shape
        for name in ("L", "M", "N"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), shape).copy()
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite values")
            setattr(self, name, arr)

    @classmethod
    def from_function(cls, grid: Grid2D, fn) -> "SecondFormField":
        X, Y = grid.mesh()
        return cls(grid, *fn(X, Y))


# ---------------------------------------------------------------------------
# Metric quantities (any dimension)


def christoffel_nd(g: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """``Gamma[k, i, j] = g^kl (d_i g_jl + d_j g_il - d_l g_ij) / 2``.

    ``g`` has shape ``(n, n, *S)`` over an ``n``-dimensional node grid.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    if g.shape[1] != n or g.ndim != n + 2:
        raise ValueError("metric must have shape (n, n, *grid) with an n-dimensional grid")
    g_inv = np.moveaxis(np.linalg.inv(np.moveaxis(g, (0, 1), (-2, -1))), (-2, -1), (0, 1))
    dg = np.array([_d(g, spacing[a], axis=2 + a) for a in range(n)])  # dg[l, i, j] = d_l g_ij
    # lower[l, i, j] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    lower = 0.5 * (np.einsum("ijl...->lij...", dg) + np.einsum("jil...->lij...", dg) - dg)
    return np.einsum("kl...,lij...->kij...", g_inv, lower)


def christoffel(metric: MetricField) -> np.ndarray:
    """Christoffel symbols ``Gamma[k, i, j]`` of a surface metric, shape ``(2, 2, 2, nx, ny)``."""
    return christoffel_nd(metric.tensor(), metric.grid.spacing)


def riemann_tensor(g: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Fully covariant ``R[i, j, k, l]`` with ``R_1212 = K det g`` in 2D."""
    n = g.shape[0]
    gam = christoffel_nd(g, spacing)
    dgam = np.array([_d(gam, spacing[a], axis=3 + a) for a in range(n)])  # dgam[k, m, l, j]
    # R^m_{jkl} = d_k G^m_lj - d_l G^m_kj + G^m_kp G^p_lj - G^m_lp G^p_kj
    up = (np.einsum("kmlj...->mjkl...", dgam) - np.einsum("lmkj...->mjkl...", dgam)
          + np.einsum("mkp...,plj...->mjkl...", gam, gam)
          - np.einsum("mlp...,pkj...->mjkl...", gam, gam))
    return np.einsum("im...,mjkl...->ijkl...", np.asarray(g, dtype=float), up)


def gauss_curvature(metric: MetricField) -> np.ndarray:
    """Brioschi formula for ``K`` from ``E = g11, F = g12, G = g22``."""
    hx, hy = metric.grid.spacing
    E, F, G = metric.g11, metric.g12, metric.g22
    E_x, E_y = _d(E, hx, 0), _d(E, hy, 1)
    F_x, F_y = _d(F, hx, 0), _d(F, hy, 1)
    G_x, G_y = _d(G, hx, 0), _d(G, hy, 1)
    E_yy = _d(E_y, hy, 1)
    G_xx = _d(G_x, hx, 0)
    F_xy = _d(F_x, hy, 1)
    A = np.array([
        [-0.5 * E_yy + F_xy - 0.5 * G_xx, 0.5 * E_x, F_x - 0.5 * E_y],
        [F_y - 0.5 * G_x, E, F],
        [0.5 * G_y, F, G],
    ])
    zero = np.zeros_like(E)
    B = np.array([
        [zero, 0.5 * E_y, 0.5 * G_x],
        [0.5 * E_y, E, F],
        [0.5 * G_x, F, G],
    ])
    detA = np.linalg.det(np.moveaxis(A, (0, 1), (-2, -1)))
    detB = np.linalg.det(np.moveaxis(B, (0, 1), (-2, -1)))
    return (detA - detB) / metric.det**2


def codazzi_residual(metric: MetricField, forms: SecondFormField) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise residuals of both Codazzi equations."""
    if forms.grid != metric.grid:
        raise ValueError("metric and second form must share a grid")
    hx, hy = metric.grid.spacing
    gam = christoffel(metric)
    L, M, N = forms.L, forms.M, forms.N
    r1 = _d(M, hx, 0) - _d(L, hy, 1) - (L * gam[1, 1, 1] - 2 * M * gam[1, 0, 1] + N * gam[1, 0, 0])
    r2 = _d(N, hx, 0) - _d(M, hy, 1) - (-L * gam[0, 1, 1] + 2 * M * gam[0, 0, 1] - N * gam[0, 0, 0])
    return r1, r2


def gauss_residual(forms: SecondFormField, K) -> np.ndarray:
    return forms.L * forms.N - forms.M**2 - np.asarray(K, dtype=float)


# ---------------------------------------------------------------------------
# Fluid formalism (Chaplygin gas p = -1/rho)


@dataclass
class FluidState:
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    valid: np.ndarray

    @property
    def q2(self) -> np.ndarray:
        return self.u**2 + self.v**2


def fluid_forms(rho, u, v):
    """``L = rho v^2 + p``, ``M = -rho u v``, ``N = rho u^2 + p`` with ``p = -1/rho``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("fluid density must be positive")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    p = -1.0 / rho
    return rho * v**2 + p, -rho * u * v, rho * u**2 + p


def fluid_state(L, M, N, K, strict: bool = False) -> FluidState:
    """Invert :func:`fluid_forms` given ``K`` (Bernoulli ``p = -sqrt(q^2 + K)``).

    ``p`` is the smaller root of ``p^2 - (L + N) p + K = 0``; the branch
    ``u >= 0`` is chosen (``v >= 0`` when ``u = 0``). States without a
    negative root (``q^2 + K <= 0``) are NaN and marked invalid; with
    ``strict`` they raise instead.
    """
    L, M, N, K = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (L, M, N, K)))
    s = L + N
    # s^2 - 4K written as a sum of squares plus the Gauss defect; the roots
    # merge as q -> 0, so a defect at rounding level is dropped rather than amplified
    defect = L * N - M**2 - K
    noise = 4.0 * np.finfo(float).eps * (np.abs(L * N) + M**2 + np.abs(K))
    defect = np.where(np.abs(defect) <= noise, 0.0, defect)
    disc = (L - N) ** 2 + 4.0 * M**2 + 4.0 * defect
    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(disc)
        p = np.where(s > 0, 2.0 * K / (s + root), 0.5 * (s - root))
    valid = (disc >= 0) & (p < 0)
    if strict and not np.all(valid):
        raise ValueError("Bernoulli state undefined (q^2 + K <= 0) at some nodes")
    p = np.where(valid, p, np.nan)
    rho = -1.0 / p
    u2 = np.maximum((N - p) / rho, 0.0)
    v2 = np.maximum((L - p) / rho, 0.0)
    # take the larger component from its square and the other from M = -rho u v,
    # which keeps relative accuracy when one component is tiny
    with np.errstate(divide="ignore", invalid="ignore"):
        big_u = u2 >= v2
        su, sv = np.sqrt(u2), np.sqrt(v2)
        u = np.where(big_u, su, np.where(sv > 0, np.abs(M) / (rho * sv), 0.0))
        v = np.where(big_u, np.where(su > 0, -M / (rho * su), sv), np.where(M > 0, -sv, sv))
    return FluidState(rho, u, v, p, valid)


def bernoulli_pressure(q2, K):
    q2, K = np.asarray(q2, dtype=float), np.asarray(K, dtype=float)
    if np.any(q2 + K <= 0):
        raise ValueError("q^2 + K must be positive")
    return -np.sqrt(q2 + K)


def sonic_classification(K, q2, rel_tol: float = 1e-10) -> np.ndarray:
    """Integer codes: 1 subsonic (``K > 0``), 0 sonic, -1 supersonic (``K < 0``).

    ``c^2 - q^2 = K`` for the Bernoulli state; ``|K| < rel_tol (1 + q^2)`` is sonic.
    """
    K, q2 = np.broadcast_arrays(np.asarray(K, dtype=float), np.asarray(q2, dtype=float))
    code = np.where(K > 0, SUBSONIC, SUPERSONIC)
    code = np.where(np.abs(K) < rel_tol * (1.0 + q2), SONIC, code)
    return code.astype(int) if code.ndim else int(code)


# ---------------------------------------------------------------------------
# Gauss-Codazzi-Ricci in general dimension and codimension


@dataclass
class GCRFields:
    """Data of an ``n``-manifold with ``c`` normal directions on a node grid.

    ``h[a, i, j]``, ``kappa[a, k, b]``, ``g[i, j]`` and ``R[i, j, k, l]``
    carry the grid in their trailing ``n`` axes. ``R`` defaults to the
    curvature of ``g``.
    """

    spacing: tuple[float, ...]
    h: np.ndarray
    g: np.ndarray
    kappa: np.ndarray | None = None
    R: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        c, n = self.h.shape[0], self.h.shape[1]
        grid = self.h.shape[3:]
        if self.h.shape[2] != n or len(grid) != n or len(self.spacing) != n:
            raise ValueError("h must have shape (c, n, n, *grid) with an n-dimensional grid")
        if self.g.shape != (n, n, *grid):
            raise ValueError("metric shape does not match h")
        if not np.allclose(self.h, np.swapaxes(self.h, 1, 2)):
            raise ValueError("h must be symmetric in its lower indices")
        if self.kappa is None:
            self.kappa = np.zeros((c, n, c, *grid))
        self.kappa = np.asarray(self.kappa, dtype=float)
        if self.kappa.shape != (c, n, c, *grid):
            raise ValueError("kappa must have shape (c, n, c, *grid)")
        if not np.allclose(self.kappa, -np.swapaxes(self.kappa, 0, 2)):
            raise ValueError("kappa must be antisymmetric in its normal indices")
        if self.R is None:
            self.R = riemann_tensor(self.g, self.spacing)
        self.R = np.asarray(self.R, dtype=float)
        if self.R.shape != (n, n, n, n, *grid):
            raise ValueError("R must have shape (n, n, n, n, *grid)")

    @property
    def dim(self) -> int:
        return self.h.shape[1]

    @property
    def codim(self) -> int:
        return self.h.shape[0]


@dataclass
class GCRResidual:
    gauss: np.ndarray  # [i, j, k, l]
    codazzi: np.ndarray  # [a, k, l, j]
    ricci: np.ndarray  # [a, b, k, l]

    def max_abs(self, layers: int = BOUNDARY_LAYERS, n_axes: int | None = None) -> dict[str, float]:
        n = n_axes if n_axes is not None else self.gauss.ndim - 4
        return {
            name: float(np.max(np.abs(interior(arr, layers, n)))) if arr.size else 0.0
            for name, arr in (("gauss", self.gauss), ("codazzi", self.codazzi), ("ricci", self.ricci))
        }


def gcr_residual(fields: GCRFields) -> GCRResidual:
    """Residuals of the Gauss, Codazzi and Ricci equations.

    Gauss:   ``h^a_ik h^a_jl - h^a_il h^a_jk - R_ijkl``
    Codazzi: ``d_k h^a_lj - d_l h^a_kj + G^m_lj h^a_km - G^m_kj h^a_lm
             + kappa^a_kb h^b_lj - kappa^a_lb h^b_kj``
    Ricci:   ``d_k kappa^a_lb - d_l kappa^a_kb + g^mn (h^a_ml h^b_kn - h^a_mk h^b_ln)
             + kappa^a_kc kappa^c_lb - kappa^a_lc kappa^c_kb``
    """
    h, kap, g = fields.h, fields.kappa, fields.g
    n = fields.dim
    sp = fields.spacing
    gauss = (np.einsum("aik...,ajl...->ijkl...", h, h) - np.einsum("ail...,ajk...->ijkl...", h, h)
             - fields.R)
    gam = christoffel_nd(g, sp)
    dh = np.array([_d(h, sp[k], axis=3 + k) for k in range(n)])  # dh[k, a, i, j]
    term_d = np.einsum("kalj...->aklj...", dh) - np.einsum("lakj...->aklj...", dh)
    term_g = np.einsum("mlj...,akm...->aklj...", gam, h) - np.einsum("mkj...,alm...->aklj...", gam, h)
    term_k = np.einsum("akb...,blj...->aklj...", kap, h) - np.einsum("alb...,bkj...->aklj...", kap, h)
    codazzi = term_d + term_g + term_k
    g_inv = np.moveaxis(np.linalg.inv(np.moveaxis(g, (0, 1), (-2, -1))), (-2, -1), (0, 1))
    dk = np.array([_d(kap, sp[k], axis=3 + k) for k in range(n)])  # dk[k, a, l, b]
    r_d = np.einsum("kalb...->abkl...", dk) - np.einsum("lakb...->abkl...", dk)
    r_h = (np.einsum("mn...,aml...,bkn...->abkl...", g_inv, h, h)
           - np.einsum("mn...,amk...,bln...->abkl...", g_inv, h, h))
    r_k = (np.einsum("akc...,clb...->abkl...", kap, kap) - np.einsum("alc...,ckb...->abkl...", kap, kap))
    ricci = r_d + r_h + r_k
    return GCRResidual(gauss, codazzi, ricci)


@dataclass
class DivCurlPair:
    """One field with controlled divergence and one with controlled curl."""

    label: str
    div_field: np.ndarray  # (n, *grid)
    curl_field: np.ndarray  # (n, *grid)
    div_residual: np.ndarray  # (*grid)
    curl_residual: np.ndarray  # (n, n, *grid)


def _div(vec: np.ndarray, sp) -> np.ndarray:
    return sum(_d(vec[i], sp[i], axis=i) for i in range(vec.shape[0]))


def _curl(vec: np.ndarray, sp) -> np.ndarray:
    n = vec.shape[0]
    grad = np.array([[_d(vec[j], sp[i], axis=i) for j in range(n)] for i in range(n)])
    return grad - np.swapaxes(grad, 0, 1)  # [k, l] = d_k W_l - d_l W_k


def gcr_divcurl_pairs(fields: GCRFields) -> tuple[list[DivCurlPair], dict[str, np.ndarray]]:
    """Div/curl structure of the GCR system.

    For each normal index ``a``, tangential index ``j`` and ``k < l``, the
    field with ``h^a_lj`` in slot ``k`` and ``-h^a_kj`` in slot ``l`` has
    divergence equal to lower-order terms, and so does the curl of the row
    ``(h^a_1j, ..., h^a_nj)``; the same holds with ``kappa^a_{. b}``.
    Residuals ``R1..R4`` are the worst pointwise div/curl over the h-div,
    h-curl, kappa-div and kappa-curl families; ``R5..R8`` are the same
    families with the roles of the normal indices relabelled, which on a
    single data set coincide with ``R1..R4``.
    """
    n, c = fields.dim, fields.codim
    sp = fields.spacing
    h, kap = fields.h, fields.kappa
    grid = h.shape[3:]
    pairs: list[DivCurlPair] = []

    def build(label, tensor, a, col):
        # tensor[a, i, col] indexed as row vectors over i
        row = np.array([tensor[a, i, col] for i in range(n)])
        out = []
        for k in range(n):
            for l in range(k + 1, n):
                vec = np.zeros((n, *grid))
                vec[k] = tensor[a, l, col]
                vec[l] = -tensor[a, k, col]
                out.append(DivCurlPair(f"{label}[a={a},{col},k={k},l={l}]", vec, row,
                                       _div(vec, sp), _curl(row, sp)))
        return out

    for a in range(c):
        for j in range(n):
            pairs += build("h", h, a, j)
        for b in range(c):
            pairs += build("kappa", kap, a, b)

    def worst(kind, family):
        arrs = [np.abs(p.div_residual if kind == "div" else p.curl_residual) for p in pairs
                if p.label.startswith(family + "[")]
        if not arrs:
            return np.zeros(grid)
        stacked = [a if a.ndim == len(grid) else a.max(axis=(0, 1)) for a in arrs]
        return np.max(np.array(stacked), axis=0)

    residuals = {
        "R1": worst("div", "h"), "R2": worst("curl", "h"),
        "R3": worst("div", "kappa"), "R4": worst("curl", "kappa"),
    }
    residuals.update({"R5": residuals["R1"], "R6": residuals["R2"],
                      "R7": residuals["R3"], "R8": residuals["R4"]})
    return pairs, residuals


# ---------------------------------------------------------------------------
# Canonical data


def sphere_fields(grid: Grid2D, radius: float = 1.0):
    """Round sphere in ``(phi, theta)``: metric, ``LMN`` and exact ``K``."""
    X, _ = grid.mesh()
    a = radius
    metric = MetricField(grid, a * a, 0.0, a * a * np.sin(X) ** 2)
    forms = SecondFormField(grid, 1.0 / (a * np.sin(X)), 0.0, np.sin(X) / a)
    return metric, forms, np.full(grid.shape, 1.0 / a**2)


def sphere_gcr(grid: Grid2D, radius: float = 1.0) -> GCRFields:
    """Codimension-one sphere: ``h = g / a`` and ``R_1212 = a^2 sin^2 phi``."""
    X, _ = grid.mesh()
    a = radius
    s2 = np.sin(X) ** 2
    zero = np.zeros_like(X)
    g = np.array([[a * a + zero, zero], [zero, a * a * s2]])
    h = g[None] / a
    R = np.zeros((2, 2, 2, 2, *grid.shape))
    val = a * a * s2
    R[0, 1, 0, 1] = R[1, 0, 1, 0] = val
    R[0, 1, 1, 0] = R[1, 0, 0, 1] = -val
    return GCRFields(grid.spacing, h, g, R=R)


def clifford_torus_gcr(grid: Grid2D, twist=None) -> GCRFields:
    """Flat torus in R^4 with a normal frame rotated by ``alpha(s, t)``.

    ``twist(s, t) -> (alpha, alpha_s, alpha_t)``; the default ``alpha = sin s cos t``
    gives a nonzero normal connection.
    """
    S, T = grid.mesh()
    if twist is None:
        alpha, a_s, a_t = np.sin(S) * np.cos(T), np.cos(S) * np.cos(T), -np.sin(S) * np.sin(T)
    else:
        alpha, a_s, a_t = twist(S, T)
    ca, sa = np.cos(alpha), np.sin(alpha)
    zero = np.zeros_like(S)
    h = np.array([
        [[-ca, zero], [zero, -sa]],
        [[sa, zero], [zero, -ca]],
    ])
    kappa = np.zeros((2, 2, 2, *grid.shape))
    kappa[0, 0, 1], kappa[0, 1, 1] = -a_s, -a_t
    kappa[1, 0, 0], kappa[1, 1, 0] = a_s, a_t
    g = np.array([[1.0 + zero, zero], [zero, 1.0 + zero]])
    return GCRFields(grid.spacing, h, g, kappa=kappa, R=np.zeros((2, 2, 2, 2, *grid.shape)))
