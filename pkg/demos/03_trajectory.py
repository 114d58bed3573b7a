"""
A flow line from the maximum to a saddle
========================================

Solves the truncated boundary value problem, then checks the energy
identity, the Fredholm index of the linearization and the exponential
approach to both ends.
"""
import numpy as np

from ymlab import functional as fn
from ymlab.critical import findCritical
from ymlab.flow import assembleD, decayFit, endpointGaps, indexReport, solveTrajectory
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
path = solveTrajectory((top, saddle), pert, 25.0, 64)
print(f"Newton iterations {path.info['iterations']}, residual {path.residual:.1e}")

E = fn.trajectoryEnergy(path, pert)
print(f"energy {E['energy']:.8f}, action drop {E['drop']:.8f}")

rep = indexReport(assembleD(path, pert))
print(f"kernel {rep['kernel_dim']}, cokernel {rep['cokernel_dim']}, index {rep['index']}")

fit = decayFit(path)
gaps = endpointGaps(path, pert)
for side in ("minus", "plus"):
    print(f"{side}: delta {fit[side]['delta']:.4f} (gap {gaps[side]:.4f}), R^2 {fit[side]['r2']:.6f}")
