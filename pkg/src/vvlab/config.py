"""JSON experiment configurations.

Every model forbids unknown keys so a config fully determines its outputs.
"""

from __future__ import annotations

import json
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


class ConfigError(ValueError):
    """Schema violation; the message lists each failing path."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SystemConfig(_Strict):
    tag: Literal["scalar", "euler_artificial", "navier_stokes", "spherical"]
    flux: Union[str, dict[str, Any]] = "burgers"
    gamma: Optional[float] = None
    kappa: Optional[float] = None
    delta: float = 0.0
    dim: Optional[int] = None

    @model_validator(mode="after")
    def _payload(self):
        if self.tag != "scalar" and self.gamma is None:
            raise ValueError(f"system.gamma is required for {self.tag}")
        if self.tag == "spherical" and self.dim is None:
            raise ValueError("system.dim is required for spherical systems")
        if self.dim is not None and self.dim < 2:
            raise ValueError("system.dim must be >= 2")
        return self


class GridConfig(_Strict):
    x_min: float = 0.0
    x_max: float = 1.0
    n_cells: int = Field(256, ge=4)
    # when set, the cell size is spacing_per_eps * eps and n_cells is derived
    spacing_per_eps: Optional[float] = Field(None, gt=0)


class BCConfig(_Strict):
    kind: Literal["periodic", "dirichlet", "outflow", "spherical"] = "outflow"
    left: Any = None
    right: Any = None
    # spherical schedule constants and exponents
    c_a: float = 1.0
    c_b: float = 1.0
    c_rho: float = 1.0
    c_delta: float = 1.0
    p_a: float = 1.0
    p_b: float = 1.0
    p_rho: float = 1.0
    p_delta: float = 1.0


class SnapshotConfig(_Strict):
    count: Optional[int] = Field(None, ge=1)
    every: Optional[int] = Field(None, ge=1)
    times: Optional[list[float]] = None
    # time levels written to snapshots.csv; monitors always see every snapshot
    write_limit: Optional[int] = Field(64, ge=2)


class MonitorConfig(_Strict):
    name: Literal[
        "max_principle", "tv_monotonicity", "invariant_region", "dissipation", "energy",
        "density_derivative", "higher_integrability", "entropy_production", "concentration",
        "spherical_energy",
    ]
    bound: Optional[list[float]] = None
    tol: Optional[float] = None
    window: Optional[list[float]] = None
    radii: Optional[list[float]] = None
    pair: str = "square"
    x_window: Optional[list[float]] = None


_MONITOR_SYSTEMS = {
    "max_principle": {"scalar"},
    "tv_monotonicity": {"scalar"},
    "invariant_region": {"euler_artificial", "navier_stokes"},
    "dissipation": {"scalar", "euler_artificial", "navier_stokes"},
    "energy": {"navier_stokes"},
    "density_derivative": {"navier_stokes"},
    "higher_integrability": {"euler_artificial", "navier_stokes"},
    "entropy_production": {"scalar", "euler_artificial"},
    "concentration": {"spherical"},
    "spherical_energy": {"spherical"},
}


class BackgroundConfig(_Strict):
    rho_minus: float
    u_minus: float = 0.0
    rho_plus: float
    u_plus: float = 0.0
    half_width: float = 5.0
    center: float = 0.0


class ReferenceConfig(_Strict):
    scheme: Literal["godunov", "lax_friedrichs"] = "godunov"
    cfl: float = 0.45


class CCLabConfig(_Strict):
    macrocell: tuple[int, int] = (8, 8)
    pairs: Optional[list[str]] = None


class ExperimentConfig(_Strict):
    name: str = "experiment"
    system: SystemConfig
    grid: GridConfig = GridConfig()
    initial: Any
    bc: BCConfig = BCConfig()
    epsilon: Optional[float] = Field(None, gt=0)
    sweep: Optional[list[float]] = None
    t_final: float = Field(..., ge=0)
    snapshots: SnapshotConfig = SnapshotConfig()
    cfl_h: float = Field(0.4, gt=0)
    cfl_p: float = Field(0.4, gt=0)
    monitors: list[MonitorConfig] = Field(default_factory=list)
    background: Optional[BackgroundConfig] = None
    reference: Optional[ReferenceConfig] = None
    cclab: Optional[CCLabConfig] = None
    output: Optional[str] = None
    deterministic: Literal[True] = True

    @field_validator("sweep")
    @classmethod
    def _sweep(cls, v):
        if v is None:
            return v
        if not v:
            raise ValueError("sweep must list at least one epsilon")
        if any(e <= 0 for e in v):
            raise ValueError("sweep epsilons must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("sweep epsilons must be strictly decreasing")
        return v

    @model_validator(mode="after")
    def _consistency(self):
        if (self.epsilon is None) == (self.sweep is None):
            raise ValueError("give exactly one of epsilon or sweep")
        for m in self.monitors:
            allowed = _MONITOR_SYSTEMS[m.name]
            if self.system.tag not in allowed:
                raise ValueError(f"monitor {m.name!r} is not valid for system {self.system.tag!r}")
            if m.name == "energy" and self.background is None:
                raise ValueError("energy monitor needs a background profile")
            if m.name == "higher_integrability" and m.window is None:
                raise ValueError("higher_integrability monitor needs a window")
            if m.name == "concentration" and not m.radii:
                raise ValueError("concentration monitor needs radii")
        if (self.system.tag == "spherical") != (self.bc.kind == "spherical"):
            raise ValueError("spherical systems use bc.kind = 'spherical' and only they do")
        if self.bc.kind == "dirichlet" and (self.bc.left is None or self.bc.right is None):
            raise ValueError("dirichlet bc needs left and right states")
        return self

    @property
    def epsilons(self) -> list[float]:
        return list(self.sweep) if self.sweep is not None else [float(self.epsilon)]


class RiemannConfig(_Strict):
    name: str = "riemann"
    system: SystemConfig
    left: Any
    right: Any
    interface: float = 0.0
    t: float = Field(1.0, gt=0)
    grid: GridConfig = GridConfig(x_min=-1.0, x_max=1.0, n_cells=200)
    output: Optional[str] = None


class GeometryConfig(_Strict):
    name: str = "geometry"
    case: Literal["sphere", "plane", "hyperbolic", "clifford_torus", "fluid"] = "sphere"
    radius: float = Field(1.0, gt=0)
    n: int = Field(64, ge=8)
    bounds: Optional[list[float]] = None
    samples: int = Field(1000, ge=1)
    seed: int = 0
    output: Optional[str] = None


class DivCurlConfig(_Strict):
    name: str = "divcurl"
    pair: Literal["compliant", "violating", "constant"] = "compliant"
    epsilons: list[float]
    n: int = Field(256, ge=8)
    averaging_scale: int = Field(16, ge=1)
    macrocell: Optional[int] = None
    output: Optional[str] = None

    @field_validator("epsilons")
    @classmethod
    def _eps(cls, v):
        if not v or any(b >= a for a, b in zip(v, v[1:])) or any(e <= 0 for e in v):
            raise ValueError("epsilons must be positive and strictly decreasing")
        return v


CONFIG_KINDS = {
    "run": ExperimentConfig,
    "sweep": ExperimentConfig,
    "experiment": ExperimentConfig,
    "riemann": RiemannConfig,
    "geometry": GeometryConfig,
    "divcurl": DivCurlConfig,
}


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def parse_config(text: str | dict, kind: str = "experiment"):
    """Validate JSON text (or a decoded dict) into the config model for ``kind``."""
    model = CONFIG_KINDS[kind]
    try:
        data = json.loads(text) if isinstance(text, str) else text
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
