import numpy as np
import pytest

from ymlab import functional as fn
from ymlab.critical import _unpack, assembleB
from ymlab.flow import (DegenerateError, abelianLinearFlow, assembleD, assembleDAdjoint,
                        coercivityEstimate, constantPath, decayFit, gaugeOrthogonality, indexReport,
                        numericIndex, omegaSecondOrderResidual, solveTrajectory, temporalGauge)
from ymlab.functional import Configuration, PerturbationSpec
from ymlab.lattice import TorusGrid

from conftest import constant_connection


def test_equal_endpoints_give_constant_path(cos_cos_points, cos_cos):
    cp = cos_cos_points["sx"]
    p = solveTrajectory((cp, cp), cos_cos, 5.0, 16)
    assert p.info["iterations"] == 0
    assert np.all(p.A == cp.cfg.A)


def test_constant_path_index_zero(cos_cos_points, cos_cos):
    p = constantPath(cos_cos_points["min"].cfg, 5.0, 12)
    assert numericIndex(assembleD(p, cos_cos)) == 0


def test_adjoint_is_transpose(trajectories):
    t = trajectories[0]
    D = assembleD(t["path"], t["pert"]).interior()
    Ds = assembleDAdjoint(t["path"], t["pert"])
    assert Ds.shape == D.T.shape
    assert abs(D.T - Ds).max() < 1e-12


def test_kernel_is_time_shift(trajectories):
    t = trajectories[0]
    p = t["path"]
    rep = indexReport(assembleD(p, t["pert"]))
    assert rep["kernel_dim"] == 1 and rep["cokernel_dim"] == 0
    k = rep["kernel"][:, 0][: p.M * p.vectors().shape[1]].reshape(p.M, -1)
    ds = np.gradient(p.vectors(), p.s, axis=0)
    # compare away from the truncation ends
    mid = slice(p.M // 4, 3 * p.M // 4)
    a, b = k[mid].ravel(), ds[mid].ravel()
    cos = abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    assert cos > 0.99


def test_analytic_mode_decay_rate():
    g = TorusGrid(8, 8)
    B = assembleB(Configuration.zero(g), None)
    n = B.layout[0][1] + B.layout[1][1]
    w, V = np.linalg.eigh(B.matrix[:n, :n].toarray())
    # first coexact Fourier mode: lambda^2 + lambda = k^2 with the lattice symbol k
    k = 2 * np.sin(g.hx / 2) / g.hx
    lam = (-1 + np.sqrt(1 + 4 * k**2)) / 2
    j = int(np.argmin(np.abs(w - lam)))
    assert abs(w[j] - lam) < 1e-12
    A, om, _ = _unpack(g, 1, np.concatenate([1e-3 * V[:, j], np.zeros(B.layout[1][1])]))
    # short range: the unstable modes amplify roundoff like exp(4 s)
    s = np.linspace(0.0, 4.0, 61)
    p = abelianLinearFlow(Configuration(g, A, om), s)
    zero = Configuration.zero(g)
    fit = decayFit(p.replace(ends=(zero, zero)), tail=1 / 3)
    assert abs(fit["plus"]["delta"] - lam) < 1e-6
    assert fit["plus"]["r2"] > 1 - 1e-10 and fit["plus"]["fpp_ok"]


def test_omega_second_order_equation():
    g = TorusGrid(8, 8)
    x, y = g.coords()
    A = g.zeros(1, 1)
    A[0, ..., 0] = 1e-2 * np.sin(y)
    res = []
    for M in (41, 81):
        s = np.linspace(0.0, 2.0, M)
        p = abelianLinearFlow(Configuration(g, A, g.zeros(0, 1)), s)
        res.append(omegaSecondOrderResidual(p)[0])
    # the exact flow only carries the O(ds^2) central-difference error
    assert res[1] < 0.3 * res[0]


def test_gauge_orthogonality_unperturbed():
    g = TorusGrid(8, 8)
    rng = np.random.default_rng(0)
    A = g.zeros(1, 1)
    A[0, ..., 0] = 1e-2 * np.sin(g.coords()[1])
    p = abelianLinearFlow(Configuration(g, A, g.zeros(0, 1)), np.linspace(0, 2, 21))
    phis = [g.random(0, 1, rng) for _ in range(3)]
    assert gaugeOrthogonality(p, phis) < 1e-8


def test_temporal_gauge_removes_psi(trajectories):
    t = trajectories[0]
    q = temporalGauge(t["path"])
    assert np.max(np.abs(q.Psi)) < 1e-12
    a0 = [fn.action(t["path"].config(m), t["pert"]) for m in range(0, t["path"].M, 8)]
    a1 = [fn.action(q.config(m), t["pert"]) for m in range(0, q.M, 8)]
    assert np.allclose(a0, a1, atol=1e-10)


def test_coercivity(cos_cos_points, cos_cos, grid8):
    r = coercivityEstimate(cos_cos_points["min"], cos_cos)
    assert r["sigma_min"] > 1e-6 and np.isfinite(r["c"])
    c = cos_cos_points["min"].cfg
    rng = np.random.default_rng(1)
    near = Configuration(grid8, c.A + 1e-3 * rng.standard_normal(c.A.shape), c.omega)
    r2 = coercivityEstimate(near, cos_cos)
    assert abs(r2["c"] / r["c"] - 1) < 0.1
    with pytest.raises(DegenerateError):
        coercivityEstimate(Configuration.zero(grid8), None)


def test_index_is_plus_sum_of_crossing_signs(trajectories):
    from ymlab.critical import PiecewiseLinearPath, spectralFlow

    t = trajectories[0]
    p = t["path"]
    flow, cr = spectralFlow(PiecewiseLinearPath(p.s, [p.config(m) for m in range(p.M)]), t["pert"])
    # spectralFlow reports -sum sign Gamma; the index of d/ds + B is +sum
    assert numericIndex(assembleD(p, t["pert"])) == -flow == sum(c["signature"] for c in cr)
