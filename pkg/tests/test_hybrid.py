import numpy as np
import pytest

from ymlab import functional as fn
from ymlab.checks import energy_inequality
from ymlab.functional import PerturbationSpec
from ymlab.hybrid import (parabolicValue, solveHybrid, solveParabolic, theta,
                          thetaChainMatrix)
from ymlab.lattice import TorusGrid
from ymlab.morse import enumerateCritical


def test_J_bounded_by_YM_with_equality_on_theta(grid8):
    for group in ("u1", "su2"):
        r = energy_inequality(grid8, group, n=200, seed=3)
        assert r["ok"], r
        assert r["max_J_minus_YM"] <= 0


def test_theta_is_pointwise_identity_on_A(grid8):
    rng = np.random.default_rng(0)
    A = grid8.random(1, 3, rng, 0.4)
    c = theta(grid8, A)
    assert np.array_equal(c.A, A)
    assert abs(fn.evalJ(c) - fn.evalYM(grid8, A)) < 1e-12 * (1 + fn.evalYM(grid8, A))


def test_parabolic_fourier_decay():
    g = TorusGrid(8, 8)
    x, _ = g.coords()
    A0 = g.zeros(1, 1)
    A0[1, ..., 0] = 1e-3 * np.cos(x)
    p = solveParabolic(g, A0, 2.0, 21)
    assert p.monotone()
    k2 = (2 * np.sin(g.hx / 2) / g.hx) ** 2
    # YM of a single mode decays like exp(-2 k^2 s); the linear part is integrated exactly
    rate = -np.log(p.values[-1] / p.values[0]) / 2.0
    assert abs(rate - 2 * k2) < 1e-9 * k2


def test_parabolic_monotone_nonlinear(grid8):
    rng = np.random.default_rng(2)
    A0 = grid8.random(1, 3, rng, 0.6)
    p = solveParabolic(grid8, A0, 1.0, 11)
    assert p.monotone()
    assert p.values[-1] < p.values[0]


def test_constant_concatenation(cos_cos_points, cos_cos):
    for cp in cos_cos_points.values():
        h = solveHybrid(cp, cp, 6.0, 12, cos_cos)
        assert h.status == "constant"
        assert h.residual <= 1e-10 and h.matching_residual <= 1e-10


def test_energy_certificate(cos_cos_points, cos_cos):
    # uphill in action: the target lies above the source
    h = solveHybrid(cos_cos_points["min"], cos_cos_points["max"], 6.0, 12, cos_cos)
    assert h.status == "empty"
    assert h.info["target_value"] > h.info["source_value"]


def test_theta_matrix_unit_upper_triangular(grid8, cos_cos):
    cat = enumerateCritical(cos_cos, grid8, n_starts=4, seed=0)
    for k in (0, 1, 2):
        out = thetaChainMatrix(cat, k, cos_cos, S=6.0, M=12, n_starts=0)
        assert out["unit_diagonal"] and out["upper_triangular"]
        assert not out["flags"]


def test_parabolic_rejects_winding_perturbation(grid8):
    from ymlab.checks import winding_perturbation

    with pytest.raises(ValueError):
        solveParabolic(grid8, grid8.zeros(1, 1), 1.0, 3, winding_perturbation(grid8))
