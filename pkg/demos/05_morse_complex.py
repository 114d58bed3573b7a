"""
Morse homology of the cos+cos model
===================================

Builds the Z2 chain complex from numerically counted flow lines and
compares its homology with the two-dimensional oracle.  Takes about a
minute on one core.
"""
from ymlab.functional import PerturbationSpec
from ymlab.lattice import TorusGrid
from ymlab.morse import ReducedTorusModel, buildComplex, enumerateCritical, homology

grid = TorusGrid(8, 8)
pert = PerturbationSpec.cos_cos(grid, 0.2)
cat = enumerateCritical(pert, grid, n_starts=8, seed=0)
cx = buildComplex(cat, pert)
for k, pairs in cx.counts.items():
    for r in pairs:
        print(f"  {r['source']} -> {r['target']}: {r['count']} flow lines over lifts {r['lifts']}")
print("boundary matrices:", {k: m.tolist() for k, m in cx.boundary.items()})
print("betti:", homology(cx))
print("oracle betti:", ReducedTorusModel(grid, pert).homology()[0])
