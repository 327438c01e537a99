"""Vanishing-viscosity laboratory for 1D conservation laws, compensated
compactness experiments and isometric-embedding residuals."""

from .cclab import (
    EmpiricalMeasure,
    VectorFieldFamily,
    canonical_families,
    commutation_residual,
    diracness,
    div_curl_experiment,
    empirical_young_measure,
    weak_continuity_sweep,
)
from .config import ConfigError, ExperimentConfig, parse_config
from .core import EulerState, Grid1D, Grid2D, RunRecord, SweepSpec, project_initial_data
from .entropy import (
    EntropyPair,
    ScalarFlux,
    TestFunctionPsi,
    burgers,
    mechanical_energy_pair,
    scalar_entropy_pair,
    weak_entropy_pair,
)
from .gas import GasModel, pressure, riemann_invariants
from .harness import RunManifest, emit_report, execute
from .reference import (
    RiemannData,
    WaveFan,
    euler_riemann_exact,
    godunov_step,
    lax_friedrichs_step,
    reference_solve,
    scalar_riemann_exact,
)
from .viscous import (
    BackgroundProfile,
    LineBC,
    Schedule,
    SolverBreakdown,
    SphericalBC,
    SphericalSchedule,
    SystemSpec,
    solve,
    viscous_rhs,
)

__version__ = "0.1.0"
