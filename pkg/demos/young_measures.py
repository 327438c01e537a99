"""Oscillations, Young measures and the commutation bracket.

Fast sine data u0 = 0.5 + 0.25 sin(x/eps) is smoothed by viscosity eps. For
each run we tabulate the empirical Young measure over space-time macrocells:
as eps -> 0 the oscillations decay on a time scale ~ eps, so the measures
collapse towards Dirac masses and the bracket <eta1 q2 - eta2 q1> -
(<eta1><q2> - <eta2><q1>) closes.

The second half contrasts two div-curl pairs: one whose products converge
weakly to the product of weak limits, one that does not.

    python demos/young_measures.py
"""

import numpy as np

from vvlab import (Grid1D, Grid2D, LineBC, Schedule, SystemSpec, burgers, canonical_families,
                   div_curl_experiment, scalar_entropy_pair, solve, weak_continuity_sweep)
from vvlab.entropy import builtin_scalar_pairs

flux = burgers()
spec = SystemSpec.scalar(flux)
grid = Grid1D(0.0, 1.0, 256)
identity = scalar_entropy_pair(flux, lambda u: u * 1.0, lambda u: np.ones_like(u), convex=False, name="identity")
square = next(p for p in builtin_scalar_pairs(flux) if p.name == "square")

runs = []
for k in (4, 8, 16, 32):
    eps = 1 / (2 * np.pi * k)
    u0 = 0.5 + 0.25 * np.sin(grid.centers / eps)
    runs.append(solve(spec, u0, eps, grid, Schedule.uniform(1.0, 512), LineBC.periodic()))

report = weak_continuity_sweep(runs, [identity, square], macrocell=(8, 64))
print("eps        mean diracness   max |bracket|")
for eps, d, r in zip(report.epsilons, report.mean_diracness, report.max_residual):
    print(f"{eps:.5f}    {d:.3e}        {r:.3e}")
print("diracness decreasing:", report.verdicts["diracness_decreasing"])

grid2 = Grid2D(0.0, 2 * np.pi, 128, 0.0, 2 * np.pi, 128, True, True)
for kind in ("compliant", "violating"):
    rep = div_curl_experiment(*canonical_families(kind, grid2, [0.25, 0.125, 0.0625]), averaging_scale=16)
    print(f"\n{kind}: gap |<u.v> - <u>.<v>| = " + ", ".join(f"{g:.3g}" for g in rep.gap))
    print("  L2 norm of div u:", ", ".join(f"{v:.3g}" for v in rep.div_l2))
