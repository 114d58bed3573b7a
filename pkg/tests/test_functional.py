import numpy as np
import pytest

from ymlab import functional as fn
from ymlab import lattice as lat
from ymlab.checks import gradient_consistency, winding_perturbation
from ymlab.functional import Configuration, Loop, PerturbationSpec
from ymlab.lattice import TorusGrid
from ymlab.lie import algebra


def test_loop_must_close():
    with pytest.raises(ValueError):
        Loop([(0, 0), (1, 0)])


def test_profiles_validated():
    g = TorusGrid(4, 4)
    with pytest.raises(ValueError):
        PerturbationSpec([Loop.x_cycle(g)], [1.0], ["bogus"], 0.1)


def test_flat_abelian_holonomy():
    g = TorusGrid(8, 8)
    A = g.zeros(1, 1)
    A[0] = 0.7 / g.Lx
    c = Configuration(g, A, g.zeros(0, 1))
    U = fn.holonomy(c, Loop.x_cycle(g, 3))
    assert np.isclose(np.angle(U[0, 0]) ** 2, 0.7**2)


def test_cos_cos_values():
    g = TorusGrid(8, 8)
    pert = PerturbationSpec.cos_cos(g, 0.2)
    for th, want in (((0, 0), -0.4), ((np.pi, 0), 0.0), ((np.pi, np.pi), 0.4)):
        A = g.zeros(1, 1)
        A[0], A[1] = th[0] / g.Lx, th[1] / g.Ly
        assert np.isclose(fn.action(Configuration(g, A, g.zeros(0, 1)), pert), want, atol=1e-14)


@pytest.mark.parametrize("group", ["u1", "su2"])
def test_gradient_with_winding_loops(group):
    g = TorusGrid(6, 6)
    r = gradient_consistency(g, group, winding_perturbation(g), n=10, seed=4)
    assert r["ok"], r


def test_perturbation_bound():
    g = TorusGrid(6, 6)
    pert = winding_perturbation(g)
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = Configuration.random(g, "su2", rng, 1.0)
        assert abs(fn.holonomyPerturbation(c, pert)[0]) <= pert.constant(3) + 1e-12


def test_u1_gauge_invariance_exact():
    g = TorusGrid(8, 8)
    pert = winding_perturbation(g)
    rng = np.random.default_rng(1)
    c = Configuration.random(g, "u1", rng, 0.3)
    gf = algebra("u1").random_group(g.shape, rng, 0.5)
    assert abs(fn.action(fn.gaugeAct(gf, c), pert) - fn.action(c, pert)) < 1e-12


def test_holonomy_perturbation_gauge_invariant_su2():
    g = TorusGrid(6, 6)
    pert = winding_perturbation(g)
    rng = np.random.default_rng(2)
    c = Configuration.random(g, "su2", rng, 0.3)
    gf = algebra("su2").random_group(g.shape, rng, 0.5)
    h0 = fn.holonomyPerturbation(c, pert)[0]
    h1 = fn.holonomyPerturbation(fn.gaugeAct(gf, c), pert)[0]
    assert abs(h1 - h0) < 1e-10


def test_energy_inequality_equality_case():
    g = TorusGrid(6, 6)
    rng = np.random.default_rng(3)
    c = Configuration.random(g, "su2", rng, 1.0)
    ym = fn.evalYM(g, c.A)
    assert fn.evalJ(c) <= ym
    th = Configuration(g, c.A, lat.hodge(g, lat.curvature(g, c.A), 2))
    assert abs(fn.evalJ(th) - ym) <= 1e-12 * (1 + ym)


def test_serialization_roundtrip():
    g = TorusGrid(6, 6)
    pert = winding_perturbation(g)
    back = PerturbationSpec.from_dict(pert.to_dict())
    assert back.digest() == pert.digest()
