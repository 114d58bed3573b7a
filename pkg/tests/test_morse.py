import numpy as np
import pytest

from ymlab.functional import PerturbationSpec
from ymlab.morse import (ChainComplex, ChainError, ReducedTorusModel, cycle_angles,
                         enumerateCritical, gf2_rank, homology, shift_lift)


def test_gf2_rank():
    assert gf2_rank(np.eye(3, dtype=int)) == 3
    assert gf2_rank(np.array([[1, 1], [1, 1]])) == 1
    # rank 2 over the reals, 1 over Z2
    assert gf2_rank(np.array([[2, 1], [0, 1]])) == 1
    assert gf2_rank(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])) == 2
    assert gf2_rank(np.zeros((0, 2))) == 0


def test_homology_of_circle_and_torus():
    circle = ChainComplex({0: [0], 1: [1]}, {1: np.array([[0]])}, np.inf)
    assert homology(circle) == {0: 1, 1: 1}
    torus = ChainComplex({0: [0], 1: [1, 2], 2: [3]},
                         {1: np.zeros((1, 2), int), 2: np.zeros((2, 1), int)}, np.inf)
    assert homology(torus) == {0: 1, 1: 2, 2: 1}
    # cancelling pair
    line = ChainComplex({0: [0, 1], 1: [2]}, {1: np.array([[1], [0]])}, np.inf)
    assert homology(line) == {0: 1, 1: 0}


def test_boundary_must_square_to_zero():
    bad = ChainComplex({0: [0], 1: [1], 2: [2]}, {1: np.array([[1]]), 2: np.array([[1]])}, np.inf)
    with pytest.raises(ChainError):
        homology(bad)


def test_reduced_oracle_torus(grid8, cos_cos):
    m = ReducedTorusModel(grid8, cos_cos)
    betti, pts, n = m.homology()
    assert [p["index"] for p in pts] == [0, 1, 1, 2]
    assert betti == {0: 1, 1: 2, 2: 1}
    # every index-one point has two lines to the min and two from the max
    assert sorted(n.values()) == [2] * 4


def test_reduced_oracle_sublevel(grid8, cos_cos):
    pts = ReducedTorusModel(grid8, cos_cos).critical_points()
    top = max(p["value"] for p in pts)
    betti = ReducedTorusModel(grid8, cos_cos, level=top - 1e-6).homology()[0]
    # the torus minus a disc around the max
    assert betti == {0: 1, 1: 2}


def test_catalog_cos_cos(grid8, cos_cos):
    cat = enumerateCritical(cos_cos, grid8, n_starts=8, seed=0)
    assert cat.indices == [0, 1, 1, 2]
    assert cat.regular
    vals = [c.value for c in cat]
    assert vals[0] < vals[1] and vals[2] < vals[3]


def test_catalog_unperturbed_not_regular(grid8):
    cat = enumerateCritical(PerturbationSpec.cos_cos(grid8, 0.0), grid8, n_starts=4, seed=0)
    assert not cat.regular
    assert any(why == "degenerate" for _, why in cat.flags["problems"])


def test_shift_lift_moves_cycle_phase(cos_cos_points):
    c = cos_cos_points["sx"].cfg
    d = cycle_angles(shift_lift(c, (1, -1))) - cycle_angles(c)
    assert np.allclose(d, [2 * np.pi, -2 * np.pi])
