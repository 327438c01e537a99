"""Gauss-Codazzi residuals on a sphere patch and the Chaplygin fluid picture.

A second fundamental form (L, M, N) is realisable on a surface only if it
satisfies the Gauss and Codazzi equations with the metric's curvature. On
the round sphere both hold exactly, so the discrete residuals are pure
finite-difference error: O(h^2), or zero where the stencils happen to be exact. The fluid
map then reads (L, M, N) as the momentum tensor of a gas with p = -1/rho:
LN - M^2 = K becomes a Bernoulli law and the sign of K the flow type.

    python demos/surfaces_and_fluids.py
"""

import numpy as np

from vvlab import Grid2D
from vvlab import geometry as geo

print("  n     Gauss      Codazzi(1)  Codazzi(2)")
for n in (32, 64, 128):
    grid = Grid2D(0.5, np.pi - 0.5, n, 0.0, 2 * np.pi, n, False, False)
    metric, forms, K = geo.sphere_fields(grid)
    # one-sided stencils near the patch edge are lower order; judge the interior
    gauss = geo.interior(geo.gauss_residual(forms, geo.gauss_curvature(metric)))
    c1, c2 = (geo.interior(r) for r in geo.codazzi_residual(metric, forms))
    print(f"{n:4d}   {np.max(np.abs(gauss)):.3e}  {np.max(np.abs(c1)):.3e}   {np.max(np.abs(c2)):.3e}")

# a perturbed form is not realisable: its residual stays O(1) under refinement
grid = Grid2D(0.5, np.pi - 0.5, 64, 0.0, 2 * np.pi, 64, False, False)
metric, forms, _ = geo.sphere_fields(grid)
wrong = geo.SecondFormField(grid, 1.1 * forms.L, forms.M, forms.N)
print(f"\nforms scaled by 1.1 in L: Gauss residual {np.max(np.abs(geo.gauss_residual(wrong, 1.0))):.3f}")

rng = np.random.default_rng(7)
rho = rng.uniform(0.2, 5.0, 8)
speed = rng.uniform(0.0, 3.0, 8)
angle = rng.uniform(0.0, 2 * np.pi, 8)
u, v = speed * np.cos(angle), speed * np.sin(angle)
L, M, N = geo.fluid_forms(rho, u, v)
K = L * N - M**2
codes = geo.sonic_classification(K, speed**2)
names = {geo.SUBSONIC: "subsonic", geo.SONIC: "sonic", geo.SUPERSONIC: "supersonic"}
print("\n  rho    |q|    c=1/rho   K=LN-M^2    flow")
for r, q, k, c in zip(rho, speed, K, codes):
    print(f"{r:6.3f} {q:6.3f}  {1 / r:7.3f}  {k:+10.4f}   {names[int(c)]}")
back = geo.fluid_state(L, M, N, K)
print("max round-trip error in rho:", np.max(np.abs(back.rho - rho)))
