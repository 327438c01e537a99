"""Isentropic gas in three settings, one per section below.

1. Artificial-viscosity Euler on Riemann data. The Riemann invariants
   w = u + rho^theta / theta and z = u - rho^theta / theta of every recorded
   state stay inside the rectangle spanned by the data.
2. Navier-Stokes with a small density ramp as background. The relative
   mechanical energy plus the accumulated dissipation never grows, and the
   bound does not care how small eps is.
3. Spherically symmetric flow in d = 3 with an inward-moving dense core. The
   mass inside small balls around the origin stays small: no atom forms.

    python demos/gas_dynamics.py
"""

import numpy as np

from vvlab import BackgroundProfile, GasModel, Grid1D, LineBC, Schedule, SphericalSchedule, SystemSpec, solve
from vvlab import diagnostics as dg

gas = GasModel(5 / 3)
grid = Grid1D(-1.0, 1.0, 400)
x = grid.centers
rho = np.where(x < 0, 1.0, 0.3)
u = np.where(x < 0, 0.5, -0.2)
run = solve(SystemSpec.euler(gas), np.stack([rho, rho * u]), 0.01, grid, Schedule.uniform(0.4, 20))
check = dg.invariant_region_check(gas, run)
print(f"Euler, gamma=5/3: inside invariant region at all {run.times.size} snapshots: {check.passed}"
      f" (worst excess {check.sup:.1e})")

gas = GasModel(1.4)
background = BackgroundProfile(1.0, 0.0, 1.01, 0.0, half_width=2.0)
print("\nNavier-Stokes relative energy, sup over t in [0, 0.5]:")
for eps in (0.04, 0.02, 0.01):
    grid = Grid1D(-8.0, 8.0, int(round(16 / (eps / 2))))
    rho_bg, u_bg = background(grid.centers)
    bump = 0.2 * np.exp(-((grid.centers + 4) ** 2)) * np.sin(2 * np.pi * (grid.centers + 4) / (8 * eps))
    rho = rho_bg + bump
    run = solve(SystemSpec.navier_stokes(gas), np.stack([rho, rho * u_bg]), eps, grid, Schedule(0.5, every=1),
                LineBC.dirichlet((1.0, 0.0), (1.01, 0.0)))
    energy = dg.energy_monitor(run, background)
    print(f"  eps={eps:<5}  cells={grid.n_cells:<5}  E+dissipation={energy.sup:.3e}  nonincreasing: {energy.passed}")

print("\nSpherical d=3 core collapse, mass within r0 (sup over time):")
radii = np.array([0.15, 0.3, 0.6, 1.2])
for eps in (0.1, 0.05):
    bc = SphericalSchedule(c_a=1.0, c_b=2.0, p_a=1.0, p_b=0.5, c_rho=1.0, p_rho=1.0)(eps)
    grid = Grid1D(bc.a_eps, bc.b_eps, int(np.ceil((bc.b_eps - bc.a_eps) / (0.5 * eps))))
    core = 0.5 * (1 - np.tanh((grid.centers - 1.0) / 0.1))
    rho = bc.rho_bar_eps + (1 - bc.rho_bar_eps) * core
    run = solve(SystemSpec.spherical(gas, 3), np.stack([rho, -0.5 * core * rho]), eps, grid,
                Schedule.uniform(1.0, 50), bc)
    prof = dg.concentration_profile(run, radii)
    print(f"  eps={eps:<5} " + "  ".join(f"r0={r:g}: {m:.4f}" for r, m in zip(radii, prof.sup)))
