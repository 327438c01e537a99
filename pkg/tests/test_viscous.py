import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vvlab.core import Grid1D, l1_distance
from vvlab.entropy import burgers, linear_flux, zero_flux
from vvlab.gas import GasModel
from vvlab.viscous import (
    BackgroundProfile,
    LineBC,
    Schedule,
    SolverBreakdown,
    SphericalBC,
    SphericalSchedule,
    SystemSpec,
    apply_boundary,
    burgers_traveling_wave,
    smooth_transition,
    solve,
    stable_dt,
    step,
    viscous_rhs,
)

GAS = GasModel(1.4)
LINE_SYSTEMS = [SystemSpec.euler(GAS), SystemSpec.navier_stokes(GAS), SystemSpec.scalar(burgers())]


def _traveling_wave_error(n, eps=0.005, t=0.5, x0=0.25):
    g = Grid1D(0.0, 1.0, n)
    u0 = burgers_traveling_wave(g.centers, 0.0, 1.0, 0.0, eps, x0)
    run = solve(SystemSpec.scalar(burgers()), u0, eps, g, t, LineBC.dirichlet(1.0, 0.0))
    exact = burgers_traveling_wave(g.centers, t, 1.0, 0.0, eps, x0)
    return l1_distance(run.final, exact, g)


def test_system_spec_validation():
    with pytest.raises(ValueError):
        SystemSpec("scalar")
    with pytest.raises(ValueError):
        SystemSpec("navier_stokes")
    with pytest.raises(ValueError):
        SystemSpec.spherical(GAS, 1)
    with pytest.raises(ValueError):
        SystemSpec("mhd", model=GAS)


@pytest.mark.parametrize("spec", LINE_SYSTEMS, ids=lambda s: s.tag)
def test_constant_state_has_zero_tendency(spec):
    g = Grid1D(0, 1, 32)
    U = np.full(32, 0.7) if spec.tag == "scalar" else np.stack([np.full(32, 1.3), np.full(32, 0.4)])
    bc = LineBC.periodic()
    np.testing.assert_allclose(viscous_rhs(spec, U, 0.01, g, bc), 0.0, atol=1e-13)
    np.testing.assert_allclose(step(spec, U, 1e-3, 0.01, g, bc), np.atleast_2d(U), atol=1e-14)


def test_heat_eigenfunction_tendency_and_decay():
    spec = SystemSpec.scalar(zero_flux())
    k = 2 * np.pi
    eps = 0.05
    for n in (64, 128):
        g = Grid1D(0, 1, n)
        u = np.sin(k * g.centers)
        rhs = viscous_rhs(spec, u, eps, g, LineBC.periodic())[0]
        # second difference symbol: -(4/h^2) sin^2(kh/2) = -k^2 + O(h^2)
        assert np.max(np.abs(rhs + eps * k**2 * u)) <= 2 * eps * k**4 * g.spacing**2 / 12
    g = Grid1D(0, 1, 256)
    t = 0.5
    run = solve(spec, np.sin(k * g.centers), eps, g, t, LineBC.periodic())
    amp = np.max(np.abs(run.final))
    assert amp == pytest.approx(np.exp(-eps * k**2 * t), rel=1e-2)


def test_spherical_static_state_is_fixed():
    spec = SystemSpec.spherical(GAS, 3)
    bc = SphericalBC(0.1, 2.0, 0.8, 0.05)
    g = bc.grid(40)
    U = np.stack([np.full(40, 0.8), np.zeros(40)])
    np.testing.assert_allclose(viscous_rhs(spec, U, 0.02, g, bc), 0.0, atol=1e-13)
    run = solve(spec, U, 0.02, g, 0.2, bc)
    np.testing.assert_allclose(run.final.as_array(), U, atol=1e-13)


def test_spherical_bc_validation_and_schedule():
    for args in [(0.0, 1.0, 1.0), (2.0, 1.0, 1.0), (0.1, 1.0, 0.0), (0.1, 1.0, 1.0, -1.0)]:
        with pytest.raises(ValueError):
            SphericalBC(*args)
    bc = SphericalSchedule(c_b=2.0, p_b=0.5)(0.04)
    assert bc.a_eps == pytest.approx(0.04) and bc.b_eps == pytest.approx(10.0)
    assert bc.rho_bar_eps == pytest.approx(0.04) and bc.delta_eps == pytest.approx(0.04)
    with pytest.raises(TypeError):
        apply_boundary(SystemSpec.spherical(GAS, 3), np.ones((2, 8)), LineBC())
    with pytest.raises(TypeError):
        apply_boundary(SystemSpec.euler(GAS), np.ones((2, 8)), bc)


def test_boundary_ghosts():
    spec = SystemSpec.scalar(burgers())
    u = np.arange(6.0)
    assert list(apply_boundary(spec, u, LineBC.periodic())[0, [0, -1]]) == [5.0, 0.0]
    assert list(apply_boundary(spec, u, LineBC.dirichlet(-1.0, 9.0))[0, [0, -1]]) == [-1.0, 9.0]
    assert list(apply_boundary(spec, u, LineBC())[0, [0, -1]]) == [0.0, 5.0]
    sph = apply_boundary(SystemSpec.spherical(GAS, 2), np.stack([u + 1, u + 2]), SphericalBC(0.1, 1, 0.3))
    np.testing.assert_allclose(sph[:, 0], [1.0, -2.0])
    np.testing.assert_allclose(sph[:, -1], [0.3, 0.0])


def test_dirichlet_compatible_far_field_keeps_state():
    bg = BackgroundProfile(1.0, 0.2, 1.0, 0.2, half_width=1.0)
    g = Grid1D(-3, 3, 60)
    U = bg.state(g.centers).as_array()
    bc = LineBC.dirichlet(*bg.end_states)
    run = solve(SystemSpec.navier_stokes(GAS), U, 0.05, g, 0.1, bc)
    np.testing.assert_allclose(run.final.as_array(), U, atol=1e-12)


def test_stable_dt_example():
    spec = SystemSpec.scalar(linear_flux(1.0))
    g = Grid1D(0, 1, 100)
    assert stable_dt(spec, np.zeros(100), 0.01, g) == pytest.approx(0.002)
    # vanishing viscosity: the hyperbolic bound takes over
    assert stable_dt(spec, np.zeros(100), 1e-9, g) == pytest.approx(0.004)
    with pytest.raises(ValueError):
        stable_dt(spec, np.zeros(100), 0.01, g, cfl_h=0)


def test_gas_at_rest_has_positive_speed():
    spec = SystemSpec.euler(GAS)
    g = Grid1D(0, 1, 10)
    dt = stable_dt(spec, np.stack([np.ones(10), np.zeros(10)]), 1e-9, g)
    assert np.isfinite(dt) and dt > 0


def test_zero_horizon_returns_initial_data():
    g = Grid1D(0, 1, 16)
    u0 = np.sin(2 * np.pi * g.centers)
    run = solve(SystemSpec.scalar(burgers()), u0, 0.01, g, 0.0, LineBC.periodic())
    assert run.times.tolist() == [0.0]
    np.testing.assert_array_equal(run.final, u0)


def test_schedule_hits_times_exactly():
    g = Grid1D(0, 1, 32)
    run = solve(SystemSpec.scalar(burgers()), 0.5 + 0.1 * np.sin(2 * np.pi * g.centers), 0.01, g,
                Schedule(0.3, times=(0.05, 0.1, 0.2)), LineBC.periodic())
    assert run.times.tolist() == [0.0, 0.05, 0.1, 0.2, 0.3]
    every = solve(SystemSpec.scalar(burgers()), np.zeros(32), 0.01, g, Schedule(0.1, every=1), LineBC.periodic())
    assert every.times.size == every.meta["n_steps"] + 1
    with pytest.raises(ValueError):
        Schedule(1.0, times=(2.0,))


def test_traveling_wave_accuracy_and_order():
    e512 = _traveling_wave_error(512)
    e256 = _traveling_wave_error(256)
    assert e512 <= 5e-3
    assert np.log2(e256 / e512) >= 1.8


def test_euler_riemann_run_keeps_density_nonnegative():
    g = Grid1D(-1, 1, 200)
    x = g.centers
    rho = np.where(x < 0, 1.0, 0.2)
    m = np.where(x < 0, -1.0, 1.0) * rho
    run = solve(SystemSpec.euler(GasModel(5 / 3)), np.stack([rho, m]), 0.01, g, 0.3)
    assert run.field("rho").min() >= 0
    assert run.monitors["rho_min"].min() >= 0


def test_navier_stokes_vacuum_is_a_breakdown():
    g = Grid1D(0, 1, 16)
    U = np.stack([np.r_[np.ones(8), np.zeros(8)], np.zeros(16)])
    with pytest.raises(SolverBreakdown):
        solve(SystemSpec.navier_stokes(GAS), U, 0.01, g, 0.1)


def test_breakdown_carries_partial_record():
    g = Grid1D(0, 1, 32)
    u0 = np.sin(2 * np.pi * g.centers)
    with pytest.raises(SolverBreakdown) as info:
        solve(SystemSpec.scalar(burgers()), u0, 0.01, g, 1.0, LineBC.periodic(), max_steps=5)
    rec = info.value.record
    assert rec.meta["breakdown"] == "max_steps"
    assert rec.monitors["t"].size == 6
    np.testing.assert_array_equal(rec.snapshots[0, 0], u0)


def test_smooth_transition_shape():
    x = np.linspace(-6, 6, 121)
    s = smooth_transition(x, 0.0, 5.0)
    assert s[0] == 0.0 and s[-1] == 1.0
    assert np.all(np.diff(s) >= 0)
    assert s[60] == pytest.approx(0.5)


@given(st.floats(0.01, 0.2), st.floats(-1.0, 1.0), st.floats(0.1, 1.0))
def test_mass_is_conserved_on_periodic_domains(eps, mean, amp):
    g = Grid1D(0, 1, 32)
    u0 = mean + amp * np.sin(2 * np.pi * g.centers)
    run = solve(SystemSpec.scalar(burgers()), u0, eps, g, 0.05, LineBC.periodic())
    mass = run.monitors["u_mass"]
    assert np.max(np.abs(mass - mass[0])) <= 1e-12 * (1 + abs(mass[0]))


def test_max_principle_needs_cell_peclet_below_two(caplog):
    g = Grid1D(0, 1, 64)
    u0 = np.where(g.centers < 0.3, 1.0, 0.0)
    bc = LineBC.dirichlet(1.0, 0.0)
    resolved = solve(SystemSpec.scalar(burgers()), u0, 0.02, g, 0.3, bc)
    assert resolved.meta["cell_peclet"] <= 2
    assert resolved.snapshots.max() <= 1.0 and resolved.snapshots.min() >= 0.0
    with caplog.at_level("WARNING", logger="vvlab.viscous"):
        coarse = solve(SystemSpec.scalar(burgers()), u0, 0.004, g, 0.3, bc)
    assert coarse.meta["cell_peclet"] > 2
    assert "Peclet" in caplog.text
    # the central scheme overshoots once the viscous layer is under-resolved
    assert coarse.snapshots.max() > 1.01
