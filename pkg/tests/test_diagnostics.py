import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vvlab.core import Grid1D, RunRecord
from vvlab.entropy import builtin_scalar_pairs, burgers, half_square_pair, zero_flux
from vvlab.gas import GasModel
from vvlab.reference import reference_solve
from vvlab.viscous import BackgroundProfile, LineBC, Schedule, SphericalBC, SystemSpec, solve
from vvlab import diagnostics as dg

GAS = GasModel(1.4)


def _synthetic(system, fields, times, values, model=None, bc=None, grid=None):
    values = np.asarray(values, dtype=float)
    grid = grid or Grid1D(0, 1, values.shape[-1])
    return RunRecord(system, 0.01, grid, fields, times, values, model=model, meta={"bc": bc, "dim": 3})


def test_total_variation_examples():
    assert dg.total_variation([0, 0, 2.5, 2.5]) == 2.5
    assert dg.total_variation([1, 2, 4, 7]) == 6
    x = (np.arange(20000) + 0.5) / 20000
    assert dg.total_variation(np.sin(2 * np.pi * x)) == pytest.approx(4, abs=1e-3)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=50))
def test_total_variation_bounds_range(values):
    v = np.asarray(values)
    assert dg.total_variation(v) >= v.max() - v.min() - 1e-12


def _burgers_riemann_run(eps=0.01, n=256):
    g = Grid1D(0, 1, n)
    u0 = np.where(g.centers < 0.3, 1.0, 0.0)
    return solve(SystemSpec.scalar(burgers()), u0, eps, g, Schedule.uniform(0.4, 20), LineBC.dirichlet(1.0, 0.0))


def test_max_principle_and_tv():
    const = _synthetic("scalar", ("u",), [0, 1], np.full((2, 1, 8), 0.3))
    mp = dg.max_principle_check(const)
    assert mp.passed and mp.meta["range"] == (0.3, 0.3)
    run = _burgers_riemann_run()
    assert dg.max_principle_check(run).passed
    assert dg.tv_monotonicity_check(run).passed
    bad = _synthetic("scalar", ("u",), [0, 1], [[[0.0, 1.0, 0.5, 0.2]], [[0.0, 1.2, 0.5, 0.2]]])
    res = dg.max_principle_check(bad)
    assert not res.passed and res.first_violation == 1.0
    assert not dg.tv_monotonicity_check(bad).passed


def test_forced_bound_fails():
    run = _burgers_riemann_run()
    res = dg.max_principle_check(run, bounds=(0.0, 0.5))
    assert not res.passed and res.first_violation == 0.0


def test_invariant_region():
    const = _synthetic("euler_artificial", ("rho", "m"), [0, 1], np.stack([np.stack([np.ones(8), np.zeros(8)])] * 2),
                       model=GAS)
    assert dg.invariant_region_check(GAS, const).passed
    g = Grid1D(-1, 1, 200)
    x = g.centers
    rho = np.where(x < 0, 1.0, 0.3)
    m = rho * np.where(x < 0, 0.5, -0.2)
    run = solve(SystemSpec.euler(GAS), np.stack([rho, m]), 0.01, g, Schedule.uniform(0.3, 10))
    res = dg.invariant_region_check(GAS, run)
    assert res.passed and res.sup <= 1e-8
    # w pushed above its initial maximum at the second snapshot
    snaps = np.stack([np.stack([np.ones(8), np.zeros(8)]), np.stack([np.ones(8), np.r_[np.zeros(7), 0.5]])])
    bad = _synthetic("euler_artificial", ("rho", "m"), [0, 1], snaps, model=GAS)
    assert not dg.invariant_region_check(GAS, bad).passed


def test_dissipation_heat_oracle():
    eps, k, t = 0.02, 2 * np.pi, 1.0
    g = Grid1D(0, 1, 256)
    run = solve(SystemSpec.scalar(zero_flux()), np.sin(k * g.centers), eps, g, Schedule.uniform(t, 200),
                LineBC.periodic())
    expected = (1 - np.exp(-2 * eps * k**2 * t)) / 4
    assert dg.dissipation_monitor(run).final == pytest.approx(expected, rel=0.02)
    const = _synthetic("scalar", ("u",), [0, 1], np.full((2, 1, 8), 0.3))
    assert dg.dissipation_monitor(const).final == 0


def test_dissipation_bounded_across_sweep():
    sups = [dg.dissipation_monitor(_burgers_riemann_run(eps, 512)).sup for eps in (0.04, 0.02, 0.01, 0.005)]
    assert dg.uniform_bound_verdict(sups)


def _ns_run(rho, m, g, bc, t=0.2):
    return solve(SystemSpec.navier_stokes(GAS), np.stack([rho, m]), 0.02, g, Schedule(t, every=1), bc)


def test_energy_monitor_at_background_and_generic_run():
    g = Grid1D(-4, 4, 160)
    bg = BackgroundProfile(1.0, 0.0, 1.0, 0.0, half_width=2.0)
    rest = _ns_run(np.ones(160), np.zeros(160), g, LineBC.dirichlet((1.0, 0.0), (1.0, 0.0)))
    assert dg.energy_monitor(rest, bg).sup == pytest.approx(0.0, abs=1e-14)
    x = g.centers
    rho = 1 + 0.2 * np.exp(-x**2) * np.sin(3 * x)
    run = _ns_run(rho, 0.1 * np.exp(-x**2), g, LineBC.dirichlet((1.0, 0.0), (1.0, 0.0)))
    res = dg.energy_monitor(run, bg)
    assert res.passed and res.meta["E0"] > 0


def test_density_derivative_monitor():
    g = Grid1D(-4, 4, 64)
    const = _ns_run(np.full(64, 1.3), np.zeros(64), g, LineBC.dirichlet((1.3, 0.0), (1.3, 0.0)), t=0.05)
    d1, d2 = dg.density_derivative_monitor(const)
    assert d1.sup == 0 and d2.sup == 0
    vals = []
    for n in (200, 400):
        g = Grid1D(-4, 4, n)
        x = g.centers
        run = _ns_run(1 + 0.3 * np.exp(-x**2), np.zeros(n), g, LineBC.dirichlet((1.0, 0.0), (1.0, 0.0)))
        vals.append([s.final for s in dg.density_derivative_monitor(run)])
    np.testing.assert_allclose(vals[0], vals[1], rtol=0.05)


def test_higher_integrability_constant_state():
    rho0 = 1.7
    g = Grid1D(0, 2, 20)
    snaps = np.stack([np.stack([np.full(20, rho0), np.zeros(20)])] * 3)
    run = _synthetic("navier_stokes", ("rho", "m"), [0, 0.5, 1.0], snaps, model=GAS, grid=g)
    res = dg.higher_integrability_monitor(run, (0.5, 1.5))
    expected = rho0 ** (GAS.gamma + GAS.theta) + rho0 ** (GAS.gamma + 1)
    assert res.final == pytest.approx(expected, rel=1e-12)
    vac = _synthetic("navier_stokes", ("rho", "m"), [0, 1.0], np.zeros((2, 2, 20)), model=GAS, grid=g)
    assert dg.higher_integrability_monitor(vac, (0.5, 1.5)).final == 0
    with pytest.raises(ValueError):
        dg.higher_integrability_monitor(run, (-1, 1))


def test_entropy_production_constant_and_viscous_identity():
    g = Grid1D(0, 1, 16)
    const = _synthetic("scalar", ("u",), [0, 0.1, 0.2], np.full((3, 1, 16), 0.4), model=burgers())
    np.testing.assert_array_equal(dg.entropy_production(const, half_square_pair(burgers())).values, 0.0)
    # viscous entropy identity: mu = eps (eta_xx - eta'' U_x^2) with eta = U^2/2
    errs = []
    for n in (64, 128):
        g = Grid1D(0, 1, n)
        eps = 0.05
        run = solve(SystemSpec.scalar(burgers()), 0.5 + 0.3 * np.sin(2 * np.pi * g.centers), eps, g,
                    Schedule(0.1, every=1), LineBC.periodic())
        mu = dg.entropy_production(run, half_square_pair(burgers()))
        U = 0.5 * (run.snapshots[1:, 0] + run.snapshots[:-1, 0])
        h = g.spacing
        ux = (np.roll(U, -1, 1) - np.roll(U, 1, 1)) / (2 * h)
        eta_xx = (np.roll(U**2 / 2, -1, 1) - U**2 + np.roll(U**2 / 2, 1, 1)) / h**2
        target = eps * (eta_xx - ux**2)[:, 1:-1]
        errs.append(np.max(np.abs(mu.values - target)))
    assert errs[0] / errs[1] >= 3


def test_godunov_shock_dissipation_rate():
    g = Grid1D(0, 1, 400)
    u0 = np.where(g.centers < 0.3, 1.0, 0.0)
    run = reference_solve(SystemSpec.scalar(burgers()), u0, g, Schedule(0.4, every=1), LineBC.dirichlet(1.0, 0.0))
    mu = dg.entropy_production(run, half_square_pair(burgers()))
    rate = mu.integral() / 0.4
    assert rate == pytest.approx(-1 / 12, rel=0.05)


def test_entropy_production_rejects_coarse_snapshots():
    run = _burgers_riemann_run()
    with pytest.raises(ValueError):
        dg.entropy_production(run, builtin_scalar_pairs(burgers())[0])


def test_h_minus_one_examples():
    assert dg.h_minus_one_norm(np.zeros((8, 8))) == 0
    ny, nx = 63, 127
    Lt, Lx = 1.0, 2.0
    ht, hx = Lt / (ny + 1), Lx / (nx + 1)
    t = ht * np.arange(1, ny + 1)
    x = hx * np.arange(1, nx + 1)
    k, l = 3 * np.pi / Lt, 2 * np.pi / Lx
    mu = np.sin(k * t)[:, None] * np.sin(l * x)[None, :]
    val = dg.h_minus_one_norm(mu, (ht, hx))
    assert val == pytest.approx(dg.l2_norm(mu, (ht, hx)) / np.hypot(k, l), rel=1e-2)
    assert dg.h_minus_one_norm(-3.5 * mu, (ht, hx)) == pytest.approx(3.5 * val, rel=1e-14)


def test_concentration_profile_examples():
    bc = SphericalBC(0.1, 2.0, 0.5)
    g = bc.grid(40)
    rho0 = 0.5
    run = _synthetic("spherical", ("rho", "m"), [0.0], np.stack([np.full(40, rho0), np.zeros(40)])[None],
                     model=GAS, bc=bc, grid=g)
    prof = dg.concentration_profile(run, [0.3, 1.0, 2.0])
    np.testing.assert_allclose(prof.sup, rho0 * (np.array([0.3, 1.0, 2.0]) ** 3 - 0.1**3) / 3, rtol=1e-12)
    vac = _synthetic("spherical", ("rho", "m"), [0.0], np.zeros((1, 2, 40)), model=GAS, bc=bc, grid=g)
    np.testing.assert_array_equal(dg.concentration_profile(vac, [0.5]).sup, 0.0)
    with pytest.raises(ValueError):
        dg.concentration_profile(run, [0.05])


def test_trend_helpers():
    eps = [0.04, 0.02, 0.01, 0.005]
    assert dg.trend_arrow(eps, [4, 3, 2, 1]) == "↓"
    assert dg.trend_arrow(eps, [1, 2, 3, 4]) == "↑"
    assert dg.trend_arrow(eps, [2, 2, 2, 2]) == "flat"
    assert dg.observed_order([1, 2, 4], [1, 4, 16]) == pytest.approx(2)
    assert dg.uniform_bound_verdict([1, 1.2, 0.9, 1.1])
    assert not dg.uniform_bound_verdict([1, 1, 1, 5])


def test_monitor_series_validation():
    with pytest.raises(ValueError):
        dg.MonitorSeries("x", [0, 1], [1.0])
    with pytest.raises(ValueError):
        dg.MonitorSeries("x", [1, 0], [1.0, 2.0])
    with pytest.raises(ValueError):
        dg.MonitorSeries("x", [0, 1], [1.0, np.nan])
