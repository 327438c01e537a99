import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vvlab.cclab import (
    EmpiricalMeasure,
    VectorFieldFamily,
    canonical_families,
    commutation_residual,
    diracness,
    div_curl_experiment,
    empirical_young_measure,
    weak_continuity_sweep,
)
from vvlab.core import Grid1D, Grid2D, RunRecord
from vvlab.entropy import TestFunctionPsi, burgers, builtin_scalar_pairs, psi_pairs, weak_entropy_pair
from vvlab.gas import GasModel
from vvlab.viscous import LineBC, SystemSpec, solve

EPS = [1 / 4, 1 / 8, 1 / 16]


def _grid(n=128):
    return Grid2D(0.0, 2 * np.pi, n, 0.0, 2 * np.pi, n, True, True)


def _scalar_run(snaps, eps=0.1, times=None):
    snaps = np.asarray(snaps, dtype=float)
    times = np.arange(snaps.shape[0], dtype=float) if times is None else times
    return RunRecord("scalar", eps, Grid1D(0, 1, snaps.shape[-1]), ("u",), times, snaps[:, None, :])


def test_measure_normalises_merges_and_prunes():
    nu = EmpiricalMeasure([[1.0], [1.0], [2.0], [3.0]], [1, 1, 2, 1e-14])
    assert nu.n_atoms == 2
    np.testing.assert_allclose(nu.weights, [0.5, 0.5])
    for pts, w in [([[1.0]], [-1.0]), ([[1.0]], [0.0]), ([[1.0], [2.0]], [1.0])]:
        with pytest.raises(ValueError):
            EmpiricalMeasure(pts, w)


def test_dirac_measure_gives_zero_residual_and_diracness():
    model = GasModel(1.4)
    pairs = psi_pairs(model, (0, 1, 2))
    nu = EmpiricalMeasure.dirac([0.8, -0.3])
    for a in pairs:
        for b in pairs:
            assert commutation_residual(nu, a, b) <= 1e-14
    assert diracness(nu) == 0


def test_two_point_measure_four_term_oracle():
    # nu = (delta_(1,0) + delta_(1,1))/2, gamma = 5/3 (lambda = 1, theta = 1/3, B = 4/3).
    # psi = 1: eta = B rho, q = B m.  psi = s: eta = B m, q = B (rho u^2 + theta rho^(2 theta + 1) / 5)
    B, th = 4 / 3, 1 / 3
    states = [(1.0, 0.0), (1.0, 1.0)]
    e1 = [B * r for r, m in states]
    q1 = [B * m for r, m in states]
    e2 = [B * m for r, m in states]
    q2 = [B * (m * m / r + th * r ** (2 * th + 1) / 5) for r, m in states]
    lhs = np.mean([a * d - b * c for a, b, c, d in zip(e1, q1, e2, q2)])
    rhs = np.mean(e1) * np.mean(q2) - np.mean(q1) * np.mean(e2)
    oracle = abs(lhs - rhs)
    assert oracle == pytest.approx(4 / 9)
    model = GasModel(5 / 3)
    p1 = weak_entropy_pair(model, TestFunctionPsi.polynomial([1.0]))
    p2 = weak_entropy_pair(model, TestFunctionPsi.monomial(1))
    nu = EmpiricalMeasure(np.array(states), [0.5, 0.5])
    assert commutation_residual(nu, p1, p2) == pytest.approx(oracle, abs=1e-12)


@given(st.lists(st.tuples(st.floats(0.1, 3), st.floats(-2, 2)), min_size=1, max_size=6),
       st.lists(st.floats(0.01, 1), min_size=6, max_size=6))
def test_bracket_is_antisymmetric(points, weights):
    pairs = psi_pairs(GasModel(2.0), (0, 2))
    nu = EmpiricalMeasure(np.array(points), weights[: len(points)])
    assert commutation_residual(nu, pairs[0], pairs[0]) <= 1e-12
    assert commutation_residual(nu, pairs[0], pairs[1]) == pytest.approx(
        commutation_residual(nu, pairs[1], pairs[0]), abs=1e-12)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_two_point_diracness(a, b):
    nu = EmpiricalMeasure([[a], [b]], [0.5, 0.5])
    assert diracness(nu) == pytest.approx((b - a) ** 2 / 4, abs=1e-12)


def test_young_measure_of_constant_and_checkerboard_runs():
    const = _scalar_run(np.full((4, 8), 0.7))
    nu = empirical_young_measure([const], (2, 4))[0]
    assert nu.shape == (2, 2)
    assert all(m.n_atoms == 1 and m.points[0, 0] == 0.7 for m in nu.ravel())
    board = np.where((np.arange(4)[:, None] + np.arange(8)[None, :]) % 2 == 0, 1.0, -1.0)
    nu = empirical_young_measure([_scalar_run(board, times=np.arange(4.0))], (4, 8))[0][0, 0]
    np.testing.assert_allclose(nu.points[:, 0], [-1.0, 1.0])
    np.testing.assert_allclose(nu.weights, [0.5, 0.5])
    with pytest.raises(ValueError):
        empirical_young_measure([const], (5, 1))
    with pytest.raises(ValueError):
        empirical_young_measure([const, _scalar_run(np.full((4, 16), 0.7))], (2, 2))


def test_young_measure_across_a_viscous_shock():
    g = Grid1D(0, 1, 128)
    u0 = np.where(g.centers < 0.625, 1.0, 0.0)
    run = solve(SystemSpec.scalar(burgers()), u0, 4e-3, g, 1e-2, LineBC.dirichlet(1.0, 0.0))
    run = RunRecord("scalar", run.epsilon, g, ("u",), [0.0], run.snapshots[-1:])
    nu = empirical_young_measure([run], (1, 32))[0][0, 2]  # cells 64..95 straddle the shock
    u = run.snapshots[0, 0, 64:96]
    high = nu.weights[nu.points[:, 0] > 0.5].sum()
    assert high == pytest.approx(np.mean(u > 0.5))
    assert 0.4 <= high <= 0.6


def test_weak_continuity_sweep_of_constant_runs():
    runs = [_scalar_run(np.full((4, 8), 0.3), eps=e) for e in (0.4, 0.2, 0.1, 0.05)]
    rep = weak_continuity_sweep(runs, builtin_scalar_pairs(burgers()), (2, 4))
    assert np.all(rep.residuals == 0) and np.all(rep.diracness == 0)
    with pytest.raises(ValueError):
        weak_continuity_sweep(runs[:3], builtin_scalar_pairs(burgers()))


def test_div_curl_canonical_families():
    grid = _grid()
    comp = div_curl_experiment(*canonical_families("compliant", grid, EPS), averaging_scale=16)
    assert comp.gap[-1] <= 1e-2
    np.testing.assert_allclose(comp.div_proxy, 0, atol=1e-10)
    np.testing.assert_allclose(comp.curl_proxy, 0, atol=1e-10)
    assert comp.verdicts["consistent"]
    viol = div_curl_experiment(*canonical_families("violating", grid, EPS), averaging_scale=16)
    assert viol.gap[-1] == pytest.approx(0.5, rel=0.05)
    assert np.all(np.diff(viol.div_l2) > 0)
    assert viol.verdicts["consistent"]
    const = div_curl_experiment(*canonical_families("constant", grid, EPS), averaging_scale=16)
    assert np.all(const.gap <= 1e-12) and np.all(const.div_proxy == 0) and np.all(const.curl_proxy == 0)


def test_div_curl_guards():
    grid = _grid(16)
    u, v = canonical_families("violating", grid, [0.2, 0.1])
    with pytest.raises(ValueError):
        div_curl_experiment(u, v, 2)  # wavelength 2 pi 0.1 is under 4 cells of 2 pi / 16
    closed = Grid2D(0, 1, 16, 0, 1, 16)
    fam = VectorFieldFamily.from_function(closed, [0.1], lambda X, Y, e: (X, Y))
    with pytest.raises(ValueError):
        div_curl_experiment(fam, fam, 2)
    with pytest.raises(ValueError):
        VectorFieldFamily(closed, [0.1, 0.2], [np.zeros((2, 16, 16))] * 2)
    with pytest.raises(ValueError):
        canonical_families("curly", grid, [0.1])
