"""
Parabolic and hybrid flows
==========================

The Yang-Mills heat flow of a single Fourier mode decays at the rate
``2 k^2`` in energy, and the comparison matrix Theta of the cos+cos model
is the identity: constant concatenations on the diagonal, energy
certificates everywhere else.
"""
import numpy as np

from ymlab.functional import PerturbationSpec
from ymlab.hybrid import solveParabolic, thetaChainMatrix
from ymlab.lattice import TorusGrid
from ymlab.morse import enumerateCritical

grid = TorusGrid(8, 8)
x, _ = grid.coords()
A0 = grid.zeros(1, 1)
A0[1, ..., 0] = 1e-3 * np.cos(x)
p = solveParabolic(grid, A0, 2.0, 21)
k2 = (2 * np.sin(grid.hx / 2) / grid.hx) ** 2
print(f"energy decay rate {-np.log(p.values[-1] / p.values[0]) / 2:.10f}, expected {2 * k2:.10f}")

pert = PerturbationSpec.cos_cos(grid, 0.2)
cat = enumerateCritical(pert, grid, n_starts=8, seed=0)
for k in (0, 1, 2):
    th = thetaChainMatrix(cat, k, pert, S=6.0, M=12, n_starts=0)
    kinds = [[c["kind"] for c in row] for row in th["certificates"]]
    print(f"degree {k}: {th['matrix'].tolist()}, certificates {kinds}")
