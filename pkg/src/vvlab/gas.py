"""Polytropic gas laws for the homentropic Euler system.

Pressure is ``p(rho) = delta*rho**2 + kappa*rho**gamma``. With the default
``kappa = (gamma-1)**2/(4*gamma)`` and ``delta = 0`` the sound speed is
``theta*rho**theta`` and ``u +/- rho**theta`` are the Riemann invariants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EulerState, velocity


@dataclass(frozen=True)
class GasModel:
    gamma: float
    kappa: float | None = None
    delta: float = 0.0

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.kappa is None:
            object.__setattr__(self, "kappa", default_kappa(self.gamma))
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def theta(self) -> float:
        return 0.5 * (self.gamma - 1.0)

    @property
    def lambda_exp(self) -> float:
        return (3.0 - self.gamma) / (2.0 * (self.gamma - 1.0))

    @property
    def invariant_scale(self) -> float:
        """Factor ``A`` in ``w, z = u +/- A*rho**theta`` (1 for the default kappa)."""
        return float(np.sqrt(self.gamma * self.kappa) / self.theta)

    @property
    def has_default_kappa(self) -> bool:
        return bool(np.isclose(self.kappa, default_kappa(self.gamma), rtol=1e-14, atol=0))

    def with_delta(self, delta: float) -> "GasModel":
        return GasModel(self.gamma, self.kappa, delta)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "kappa": self.kappa, "delta": self.delta}


def default_kappa(gamma: float) -> float:
    return (gamma - 1.0) ** 2 / (4.0 * gamma)


def _nonneg(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    return rho


def pressure(model: GasModel, rho):
    rho = _nonneg(rho)
    return model.delta * rho**2 + model.kappa * rho**model.gamma


def pressure_derivative(model: GasModel, rho):
    rho = _nonneg(rho)
    return 2.0 * model.delta * rho + model.gamma * model.kappa * rho ** (model.gamma - 1.0)


def internal_energy(model: GasModel, rho):
    """Specific internal energy, so that ``p = rho**2 * e'(rho)``."""
    rho = _nonneg(rho)
    return model.kappa / (model.gamma - 1.0) * rho ** (model.gamma - 1.0) + model.delta * rho


def sound_speed(model: GasModel, rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("sound speed needs positive density")
    return np.sqrt(pressure_derivative(model, rho))


def _sound_speed_or_zero(model: GasModel, rho):
    rho = np.maximum(np.asarray(rho, dtype=float), 0.0)
    return np.sqrt(pressure_derivative(model, rho))


def riemann_invariants(model: GasModel, rho, u):
    """``(w, z) = (u + A rho**theta, u - A rho**theta)``; ``A = 1`` by default."""
    rho = _nonneg(rho)
    r = model.invariant_scale * rho**model.theta
    u = np.asarray(u, dtype=float)
    return u + r, u - r


def invariants_of_state(model: GasModel, rho, m):
    return riemann_invariants(model, rho, velocity(rho, m))


def euler_flux(model: GasModel, state):
    """``(m, m**2/rho + p(rho))``, zero in vacuum cells."""
    if isinstance(state, EulerState):
        rho, m = state.rho, state.m
    else:
        rho, m = state
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    u = velocity(rho, m)
    return m * 1.0, m * u + pressure(model, np.maximum(rho, 0.0))


def max_wave_speed(model: GasModel, rho, m) -> float:
    u = velocity(rho, m)
    return float(np.max(np.abs(u) + _sound_speed_or_zero(model, rho)))


def entropy_kernel(model: GasModel, rho, u, s):
    """Weak entropy kernel ``[rho**(2 theta) - (u - s)**2]_+ ** lambda``.

    For ``lambda = 0`` the kernel is the indicator of the open support.
    Outside ``|s - u| < rho**theta`` it is exactly zero.
    """
    rho = _nonneg(rho)
    r = rho**model.theta
    d = np.abs(np.asarray(u, dtype=float) - np.asarray(s, dtype=float))
    pos = d < r
    arg = (r - d) * (r + d)
    lam = model.lambda_exp
    if lam == 0:
        out = np.where(pos, 1.0, 0.0)
    else:
        out = np.where(pos, np.power(np.where(pos, arg, 1.0), lam), 0.0)
    return out if out.ndim else float(out)


def euler_jacobian(model: GasModel, rho, m):
    """Flux Jacobian ``dF/dU`` at non-vacuum states, shape ``(..., 2, 2)``."""
    rho = np.asarray(rho, dtype=float)
    u = velocity(rho, m)
    jac = np.zeros(np.shape(rho) + (2, 2))
    jac[..., 0, 1] = 1.0
    jac[..., 1, 0] = pressure_derivative(model, rho) - u**2
    jac[..., 1, 1] = 2.0 * u
    return jac
