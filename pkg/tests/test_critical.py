import numpy as np
import pytest

from ymlab import functional as fn
from ymlab.checks import eigen_reduction, hellmann_feynman
from ymlab.critical import (NewtonError, PiecewiseLinearPath, assembleB, checkEigenReduction,
                            fingerprint, findCritical, hessian_matrix, same_fingerprint, spectralFlow)
from ymlab.functional import Configuration, PerturbationSpec
from ymlab.hybrid import parabolicGradient
from ymlab.lattice import TorusGrid
from ymlab.morse import shift_lift

from conftest import constant_connection


def test_cos_cos_critical_points(cos_cos_points):
    want = {"min": (0, -0.4), "sx": (1, 0.0), "sy": (1, 0.0), "max": (2, 0.4)}
    for k, (idx, val) in want.items():
        cp = cos_cos_points[k]
        assert cp.morse_index == idx
        assert abs(cp.value - val) < 1e-8
        assert cp.residual < 1e-10
        assert cp.flags["nondegenerate"]
        assert cp.flags["irreducible_mod_constants"]


def test_unperturbed_flat_point_is_degenerate(grid8):
    cp = findCritical(PerturbationSpec.cos_cos(grid8, 0.0), constant_connection(grid8, (0.3, 0.2)))
    assert not cp.flags["nondegenerate"]


def test_b_operator_symmetric(grid8, cos_cos):
    c = Configuration.random(grid8, "u1", np.random.default_rng(0), 0.5)
    B = assembleB(c, cos_cos).matrix
    assert abs(B - B.T).max() < 1e-13
    c2 = Configuration.random(TorusGrid(4, 4), "su2", np.random.default_rng(1), 0.5)
    B2 = assembleB(c2, PerturbationSpec.cos_cos(c2.grid, 0.3)).matrix
    assert abs(B2 - B2.T).max() < 1e-13


def test_hessian_matches_gradient_differences():
    g = TorusGrid(4, 4)
    rng = np.random.default_rng(2)
    pert = PerturbationSpec.cos_cos(g, 0.3)
    A = g.random(1, 3, rng, 0.4)
    H = hessian_matrix(g, A, pert)
    r = np.sqrt(g.weight(1, 3)).ravel()
    x = rng.standard_normal(A.size)
    h = 1e-6
    dA = (x / r).reshape(A.shape)
    fd = (parabolicGradient(g, A + h * dA, pert) - parabolicGradient(g, A - h * dA, pert)) / (2 * h)
    assert np.allclose(H @ x, r * fd.ravel(), atol=1e-7)


def test_eigen_reduction_at_flat_point(grid8):
    rep = checkEigenReduction(Configuration.zero(grid8), None)
    assert rep["passed"]
    assert rep["kernel_B"] == rep["kernel_C"] == 2


def test_eigen_reduction_random(grid8, cos_cos):
    c = Configuration.random(grid8, "u1", np.random.default_rng(3), 0.5)
    assert eigen_reduction(c, cos_cos)["ok"]


def test_hellmann_feynman_su2():
    rng = np.random.default_rng(4)
    g = TorusGrid(4, 4, u=0.3 * rng.standard_normal((4, 4)))
    r = hellmann_feynman(Configuration.random(g, "su2", rng, 0.5), Configuration.random(g, "su2", rng, 0.5))
    assert r["ok"], r["branches"]


def test_fingerprint_gauge_invariant_under_lift(cos_cos_points, cos_cos):
    cp = cos_cos_points["sx"]
    f0 = fingerprint(cp.cfg, cos_cos)
    f1 = fingerprint(shift_lift(cp.cfg, (1, -1)), cos_cos)
    assert same_fingerprint(f0, f1)
    assert not same_fingerprint(f0, fingerprint(cos_cos_points["sy"].cfg, cos_cos))


def test_newton_failure_reported(grid8, cos_cos):
    c = Configuration.random(grid8, "u1", np.random.default_rng(5), 3.0)
    with pytest.raises(NewtonError):
        findCritical(cos_cos, c, maxit=1)


def test_spectral_flow_segment_crossings_agree(cos_cos_points, cos_cos):
    a, b = cos_cos_points["max"].cfg, cos_cos_points["sx"].cfg
    path = PiecewiseLinearPath([0.0, 1.0], [a, b])
    fB, cB = spectralFlow(path, cos_cos, refine=16)
    fC, cC = spectralFlow(path, cos_cos, operator="C_f", refine=16, check_C=False)
    assert len(cB) == len(cC) >= 1
    assert fB == fC
    assert all(c["positivity_factor"] >= 1 - 1e-9 for c in cB)
    # the negative count of B drops by the index difference
    assert abs(fB) == cos_cos_points["max"].morse_index - cos_cos_points["sx"].morse_index
