"""
Spectral flow along a straight path
===================================

Counts eigenvalue crossings of ``B_{f,0}`` and of ``C_f`` along the segment
from the maximum to a saddle.  The crossing operator of the single
crossing is positive, so the index of ``d/ds + B`` is +1.
"""
import numpy as np

from ymlab.critical import PiecewiseLinearPath, findCritical, spectralFlow
from ymlab.functional import Configuration, PerturbationSpec
from ymlab.lattice import TorusGrid

grid = TorusGrid(8, 8)
pert = PerturbationSpec.cos_cos(grid, 0.2)


def constant(th):
    A = grid.zeros(1, 1)
    A[0], A[1] = th[0] / grid.Lx, th[1] / grid.Ly
    return Configuration(grid, A, grid.zeros(0, 1))


top = findCritical(pert, constant((np.pi, np.pi)))
saddle = findCritical(pert, constant((np.pi, 0.0)))
path = PiecewiseLinearPath([-1.0, 1.0], [top.cfg, saddle.cfg])

flow, crossings = spectralFlow(path, pert, refine=32)
for c in crossings:
    print(f"s = {c['s']:+.6f}: signature {c['signature']:+d}, "
          f"C_f signature {c['C_signature']:+d}, positivity factor {c['positivity_factor']:.4f}")
print(f"-sum sign Gamma = {flow}; Morse index difference = {top.morse_index - saddle.morse_index}")
