"""
Lattice calculus on the torus
=============================

Covariant differences, their adjoints and the two functionals on an 8x8
grid.  Everything here is exact up to roundoff for u(1).
"""
import numpy as np

from ymlab import functional as fn
from ymlab import lattice as lat
from ymlab.functional import Configuration

grid = lat.TorusGrid(8, 8)
rng = np.random.default_rng(0)

# a random su(2) connection, a 0-form and a 1-form
A = grid.random(1, 3, rng, 0.5)
phi = grid.random(0, 3, rng)
a = grid.random(1, 3, rng)

# <d_A phi, a> against <phi, d_A^* a>
lhs = grid.inner(lat.covD0(grid, A, phi), a, 1)
rhs = grid.inner(phi, lat.coD1(grid, A, a), 0)
print(f"adjointness defect: {abs(lhs - rhs) / abs(lhs):.1e}")

# J(A, omega) never exceeds YM(A), with equality at omega = *F_A
c = Configuration(grid, A, grid.random(0, 3, rng))
print(f"J = {fn.evalJ(c):.4f} <= YM = {fn.evalYM(grid, A):.4f}")
w = lat.hodge(grid, lat.curvature(grid, A), 2)
print(f"J(A, *F) - YM = {fn.evalJ(Configuration(grid, A, w)) - fn.evalYM(grid, A):.1e}")

# the gradient against a central difference
pert = fn.PerturbationSpec.cos_cos(grid, 0.2)
cu = Configuration.random(grid, "u1", rng, 0.5)
xi = Configuration.random(grid, "u1", rng, 1.0)
gA, gw = fn.gradient(cu, pert)
exact = grid.inner(gA, xi.A, 1) + grid.inner(gw, xi.omega, 0)
h = 1e-5
fd = (fn.action(cu + xi.scaled(h), pert) - fn.action(cu + xi.scaled(-h), pert)) / (2 * h)
print(f"directional derivative: {exact:.10f} vs {fd:.10f}")
