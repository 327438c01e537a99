"""Entropy pairs for scalar laws and for the homentropic Euler system."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline
from scipy.special import beta as beta_fn
from scipy.special import roots_jacobi, roots_legendre

from .core import velocity
from .gas import GasModel, internal_energy, pressure


class QuadratureWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class EntropyPair:
    """An entropy ``eta`` with its flux ``q``.

    Scalar pairs are called as ``eta(U)``; gas pairs as ``eta(rho, m)``.
    """

    eta: Callable[..., np.ndarray]
    q: Callable[..., np.ndarray]
    convex: bool = False
    weak: bool = False
    name: str = ""
    grad_eta: Callable[..., tuple] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, *state):
        return self.eta(*state), self.q(*state)


# ---------------------------------------------------------------------------
# Scalar fluxes


@dataclass(frozen=True)
class ScalarFlux:
    """Flux ``F`` with derivative ``dF``; ``convex`` enables the exact Riemann solver.

    ``sonic`` is the minimiser of a convex flux (where ``dF`` vanishes), and
    ``inverse_df`` inverts ``dF`` for rarefaction fans when known in closed form.
    """

    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    convex: bool = False
    sonic: float | None = None
    inverse_df: Callable[[np.ndarray], np.ndarray] | None = None
    d2f: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, u):
        return self.f(np.asarray(u, dtype=float))

    def to_dict(self) -> dict:
        return {"name": self.name}


def burgers() -> ScalarFlux:
    return ScalarFlux(
        f=lambda u: 0.5 * u * u,
        df=lambda u: u * 1.0,
        d2f=lambda u: np.ones_like(u),
        name="burgers",
        convex=True,
        sonic=0.0,
        inverse_df=lambda xi: xi * 1.0,
    )


def linear_flux(a: float) -> ScalarFlux:
    a = float(a)
    return ScalarFlux(
        f=lambda u: a * u,
        df=lambda u: a * np.ones_like(u),
        d2f=lambda u: np.zeros_like(u),
        name=f"linear({a:g})",
    )


def zero_flux() -> ScalarFlux:
    return ScalarFlux(f=lambda u: np.zeros_like(u), df=lambda u: np.zeros_like(u), name="zero")


def cubic_flux() -> ScalarFlux:
    """``F = U**3/3``, convex only on ``U >= 0``."""
    return ScalarFlux(
        f=lambda u: u**3 / 3.0, df=lambda u: u * u, d2f=lambda u: 2.0 * u, name="cubic"
    )


def flux_from_expression(expr: str, convex: bool = False) -> ScalarFlux:
    """Build a flux from a SymPy-parsable expression in ``u``."""
    import sympy as sp

    u = sp.Symbol("u", real=True)
    f = sp.sympify(expr, locals={"u": u})
    df = sp.diff(f, u)
    d2f = sp.diff(df, u)
    sonic = None
    if convex:
        roots = [r for r in sp.solve(sp.Eq(df, 0), u) if r.is_real]
        sonic = float(roots[0]) if roots else None
    fl = sp.lambdify(u, f, "numpy")
    dfl = sp.lambdify(u, df, "numpy")
    d2fl = sp.lambdify(u, d2f, "numpy")
    wrap = lambda fn: (lambda x: np.broadcast_to(fn(np.asarray(x, float)), np.shape(x)) * 1.0)
    return ScalarFlux(
        f=wrap(fl), df=wrap(dfl), d2f=wrap(d2fl), name=expr, convex=convex, sonic=sonic
    )


BUILTIN_FLUXES = {"burgers": burgers, "zero": zero_flux, "cubic": cubic_flux}


def get_flux(name: str, **params) -> ScalarFlux:
    if name == "linear":
        return linear_flux(params.get("a", 1.0))
    if name in BUILTIN_FLUXES:
        return BUILTIN_FLUXES[name]()
    return flux_from_expression(name, convex=params.get("convex", False))


# ---------------------------------------------------------------------------
# Scalar entropy pairs


_CHUNK = 1 << 16


@lru_cache(maxsize=None)
def _legendre(order: int):
    return roots_legendre(order)


def _integrate_from_zero(integrand, U, breakpoints: Sequence[float] = (), order: int = 64):
    """``int_0^U integrand(w) dw`` by Gauss-Legendre on segments split at breakpoints."""
    U = np.asarray(U, dtype=float)
    if U.size > _CHUNK:
        flat = U.ravel()
        parts = [
            _integrate_from_zero(integrand, flat[i : i + _CHUNK], breakpoints, order)
            for i in range(0, flat.size, _CHUNK)
        ]
        return np.concatenate(parts).reshape(U.shape)
    t, wts = _legendre(order)
    bs = np.sort(np.asarray(breakpoints, dtype=float))
    up = np.maximum(U, 0.0)
    down = np.minimum(U, 0.0)
    ends = [np.zeros_like(U)]
    for b_asc, b_desc in zip(bs, bs[::-1]):
        ends.append(np.where(U >= 0, np.clip(b_asc, 0.0, up), np.clip(b_desc, down, 0.0)))
    ends.append(U)
    total = np.zeros_like(U)
    for a, b in zip(ends[:-1], ends[1:]):
        half = 0.5 * (b - a)
        nodes = 0.5 * (a + b)[..., None] + half[..., None] * t
        total = total + half * np.sum(wts * integrand(nodes), axis=-1)
    return total


def scalar_entropy_pair(
    flux: ScalarFlux,
    eta: Callable,
    deta: Callable,
    *,
    convex: bool = False,
    breakpoints: Sequence[float] = (),
    name: str = "",
    order: int = 64,
) -> EntropyPair:
    """Pair with ``q(U) = int_0^U eta'(w) F'(w) dw`` (so ``q(0) = 0``).

    Kinks of ``eta'`` must be listed in ``breakpoints`` for full accuracy.
    """

    def q(U):
        return _integrate_from_zero(lambda w: deta(w) * flux.df(w), U, breakpoints, order)

    return EntropyPair(
        eta=lambda U: np.asarray(eta(np.asarray(U, dtype=float)), dtype=float),
        q=q,
        convex=convex,
        name=name or "scalar",
        grad_eta=lambda U: (deta(np.asarray(U, dtype=float)),),
    )


def kruzhkov_pair(flux: ScalarFlux, k: float) -> EntropyPair:
    k = float(k)
    return scalar_entropy_pair(
        flux,
        lambda U: np.abs(U - k),
        lambda U: np.sign(U - k),
        convex=True,
        breakpoints=[k],
        name=f"kruzhkov({k:g})",
    )


def builtin_scalar_pairs(flux: ScalarFlux) -> list[EntropyPair]:
    """The square pair ``(U**2, 2 int w F')`` and the flux pair ``(F, int F'**2)``."""
    square = scalar_entropy_pair(
        flux, lambda U: U * U, lambda U: 2.0 * U, convex=True, name="square"
    )
    flux_pair = scalar_entropy_pair(
        flux, flux.f, flux.df, convex=flux.convex, name="flux"
    )
    return [square, flux_pair]


def half_square_pair(flux: ScalarFlux) -> EntropyPair:
    return scalar_entropy_pair(
        flux, lambda U: 0.5 * U * U, lambda U: U * 1.0, convex=True, name="half_square"
    )


# ---------------------------------------------------------------------------
# Weak entropy pairs of the Euler system


class TestFunctionPsi:
    """Test function generating a weak entropy pair.

    Use :meth:`polynomial` (coefficients lowest degree first),
    :meth:`tabulated` (C2 cubic spline, zero outside the table) or
    :meth:`from_callable`.
    """

    __test__ = False  # not a pytest class

    def __init__(self, fn: Callable, support: tuple[float, float] | None = None, label: str = ""):
        self._fn = fn
        self.support = support
        self.label = label

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.asarray(self._fn(s), dtype=float) * np.ones_like(s)
        if self.support is not None:
            lo, hi = self.support
            out = np.where((s >= lo) & (s <= hi), out, 0.0)
        return out

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "TestFunctionPsi":
        poly = Polynomial(np.asarray(coeffs, dtype=float))
        return cls(poly, None, f"poly{list(coeffs)}")

    @classmethod
    def monomial(cls, k: int) -> "TestFunctionPsi":
        return cls.polynomial([0.0] * k + [1.0])

    @classmethod
    def tabulated(cls, s, values) -> "TestFunctionPsi":
        s = np.asarray(s, dtype=float)
        values = np.asarray(values, dtype=float)
        if s.ndim != 1 or s.size < 4 or np.any(np.diff(s) <= 0):
            raise ValueError("tabulated psi needs >= 4 increasing nodes")
        spline = CubicSpline(s, values, bc_type="clamped")
        return cls(spline, (float(s[0]), float(s[-1])), "tabulated")

    @classmethod
    def from_callable(cls, fn: Callable, support=None) -> "TestFunctionPsi":
        return cls(fn, support, getattr(fn, "__name__", "callable"))


def kernel_mass(model: GasModel) -> float:
    """``B_lambda = int_{-1}^{1} (1 - t**2)**lambda dt``."""
    lam = model.lambda_exp
    return float(beta_fn(0.5, lam + 1.0))


@lru_cache(maxsize=None)
def _kernel_rule(lam: float, order: int, method: str):
    """Nodes ``t`` in (-1, 1) and weights absorbing ``(1 - t**2)**lam``."""
    if method == "jacobi":
        t, w = roots_jacobi(order, lam, lam)
    elif method == "sine":
        x, wl = roots_legendre(order)
        omega = 0.5 * np.pi * x
        t = np.sin(omega)
        w = 0.5 * np.pi * wl * np.cos(omega) ** (2.0 * lam + 1.0)
    else:
        raise ValueError(f"unknown quadrature method {method!r}")
    return np.asarray(t), np.asarray(w)


def _weak_moments(model: GasModel, psi, rho, m, order: int, method: str):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    u = velocity(rho, m)
    t, w = _kernel_rule(model.lambda_exp, order, method)
    r = rho**model.theta
    s = u[..., None] + r[..., None] * t
    ps = psi(s) * w
    eta = rho * np.sum(ps, axis=-1)
    q = rho * np.sum((u[..., None] + model.theta * r[..., None] * t) * ps, axis=-1)
    return eta, q


def weak_entropy_pair(
    model: GasModel,
    psi: TestFunctionPsi | Callable,
    *,
    order: int = 64,
    method: str = "jacobi",
    check: bool = False,
) -> EntropyPair:
    """Weak entropy pair generated by the kernel and a test function.

    With ``s = u + rho**theta * t`` both integrals reduce to
    ``rho * int_{-1}^{1} (1 - t**2)**lambda (...) dt``. The default rule is
    Gauss-Jacobi with weight ``(1 - t**2)**lambda``, which absorbs the
    endpoint behaviour for every ``lambda > -1``; ``method="sine"`` uses
    Gauss-Legendre after ``t = sin(omega)``. ``check=True`` compares against a
    half-order rule and warns when they differ by more than ``1e-8``.
    """
    if model.delta != 0 or not model.has_default_kappa:
        raise ValueError("weak entropy pairs need delta = 0 and the default kappa")
    if not isinstance(psi, TestFunctionPsi):
        psi = TestFunctionPsi.from_callable(psi)

    def moments(rho, m):
        eta, q = _weak_moments(model, psi, rho, m, order, method)
        if check:
            eta2, q2 = _weak_moments(model, psi, rho, m, max(order // 2, 4), method)
            scale = 1.0 + np.max(np.abs(eta)) + np.max(np.abs(q))
            err = max(np.max(np.abs(eta - eta2)), np.max(np.abs(q - q2))) / scale
            if err > 1e-8:
                warnings.warn(
                    f"weak entropy quadrature not converged (rel. diff {err:.2e})",
                    QuadratureWarning,
                    stacklevel=3,
                )
        return eta, q

    return EntropyPair(
        eta=lambda rho, m: moments(rho, m)[0],
        q=lambda rho, m: moments(rho, m)[1],
        convex=False,
        weak=True,
        name=f"weak[{psi.label}]",
        meta={"psi": psi, "order": order, "method": method},
    )


def mechanical_energy_pair(model: GasModel) -> EntropyPair:
    """``eta* = m**2/(2 rho) + rho e(rho)`` with its energy flux."""

    def eta(rho, m):
        rho = np.asarray(rho, dtype=float)
        u = velocity(rho, m)
        return 0.5 * m * u + rho * internal_energy(model, np.maximum(rho, 0.0))

    def q(rho, m):
        rho = np.asarray(rho, dtype=float)
        u = velocity(rho, m)
        r = np.maximum(rho, 0.0)
        return 0.5 * m * u * u + m * internal_energy(model, r) + u * pressure(model, r)

    def grad(rho, m):
        rho = np.asarray(rho, dtype=float)
        u = velocity(rho, m)
        r = np.maximum(rho, 0.0)
        h = internal_energy(model, r) + np.divide(
            pressure(model, r), r, out=np.zeros_like(r), where=r > 0
        )
        return -0.5 * u * u + h, u

    return EntropyPair(eta=eta, q=q, convex=True, weak=True, name="mechanical", grad_eta=grad)


def relative_mechanical_energy(model: GasModel, state, ref_state):
    """Relative mechanical energy of ``state`` with respect to ``ref_state``.

    Both arguments are ``(rho, m)`` pairs (arrays broadcast together); the
    reference density must be positive.
    """
    rho, m = (np.asarray(a, dtype=float) for a in state)
    rho_bar, m_bar = (np.asarray(a, dtype=float) for a in ref_state)
    if np.any(rho_bar <= 0):
        raise ValueError("reference density must be positive")
    pair = mechanical_energy_pair(model)
    g_rho, g_m = pair.grad_eta(rho_bar, m_bar)
    return pair.eta(rho, m) - pair.eta(rho_bar, m_bar) - g_rho * (rho - rho_bar) - g_m * (m - m_bar)


def psi_pairs(model: GasModel, degrees: Sequence[int] = (0, 1, 2), **kw) -> list[EntropyPair]:
    """Weak pairs for the monomials ``s**k``."""
    return [weak_entropy_pair(model, TestFunctionPsi.monomial(k), **kw) for k in degrees]
