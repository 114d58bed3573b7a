"""Acceptance criteria, one PASS/FAIL line each.

The lines are printed as they are checked and repeated in the terminal
summary.  Trajectories come from the session fixture in conftest.py.
"""
import numpy as np
import pytest

from ymlab import functional as fn
from ymlab import checks
from ymlab.critical import PiecewiseLinearPath, spectralFlow
from ymlab.flow import (assembleD, coercivityEstimate, decayFit, endpointGaps, indexReport)
from ymlab.functional import Configuration, PerturbationSpec
from ymlab.hybrid import solveHybrid, thetaChainMatrix
from ymlab.lattice import TorusGrid
from ymlab.morse import ReducedTorusModel, buildComplex, enumerateCritical, homology


def test_calculus_exactness(grid8, record):
    res = [checks.adjointness(grid8, g, n=1000, seed=0, tol=1e-13) for g in ("u1", "su2")]
    worst = max(r["value"] for r in res)
    ok = record(1, all(r["ok"] for r in res), "discrete adjointness",
                f"max relative defect {worst:.2e} (tol 1e-13), 1000 samples per group")
    assert ok


def test_gradient_consistency(grid8, cos_cos, record):
    wind = checks.winding_perturbation(grid8)
    res = []
    for g in ("u1", "su2"):
        res.append(checks.gradient_consistency(grid8, g, cos_cos if g == "u1" else None, n=100, seed=0))
        res.append(checks.gradient_consistency(grid8, g, wind, n=100, seed=1))
    worst = max(r["value"] for r in res)
    ok = record(2, all(r["ok"] for r in res), "gradient consistency",
                f"max relative error {worst:.2e} (tol 1e-6), incl. t-winding loops")
    assert ok


def test_energy_inequality(grid8, record):
    res = [checks.energy_inequality(grid8, g, n=1000, seed=0) for g in ("u1", "su2")]
    ineq = max(r["max_J_minus_YM"] for r in res)
    eq = max(r["value"] for r in res)
    ok = record(3, all(r["ok"] for r in res), "J <= YM, equality on theta",
                f"max J - YM = {ineq:.3e}, max equality defect {eq:.2e} (tol 1e-12)")
    assert ok


def test_eigen_reduction(grid8, cos_cos, cos_cos_points, record):
    rng = np.random.default_rng(0)
    cases = [(cos_cos_points["min"].cfg, cos_cos), (cos_cos_points["sx"].cfg, cos_cos),
             (Configuration.random(grid8, "u1", rng, 0.5), cos_cos),
             # the unperturbed flat point has a kernel at lambda = 0
             (Configuration.zero(grid8), None)]
    res = [checks.eigen_reduction(c, pert, tol=1e-8) for c, pert in cases]
    worst = max(r["value"] for r in res)
    kern = all(r["kernel_B"] == r["kernel_C"] for r in res)
    ok = record(4, all(r["ok"] for r in res) and kern, "B_f0 <-> C_f,lambda reduction",
                f"max residual {worst:.2e} (tol 1e-8); kernel dims B/C "
                + ", ".join(f"{r['kernel_B']}/{r['kernel_C']}" for r in res))
    assert ok


def test_hellmann_feynman(grid8, record):
    rng = np.random.default_rng(0)
    g = TorusGrid(8, 8, grid8.Lx, grid8.Ly, 0.3 * rng.standard_normal(grid8.shape))
    r = checks.hellmann_feynman(Configuration.random(g, "su2", rng, 0.5), Configuration.random(g, "su2", rng, 0.5))
    ok = record(5, r["ok"], "Hellmann-Feynman slopes",
                f"max relative error {r['value']:.2e} over {len(r['branches'])} simple branches (tol 1e-4)")
    assert ok


def _spectral(t):
    p = t["path"]
    path = PiecewiseLinearPath(p.s, [p.config(m) for m in range(p.M)])
    flB, crB = spectralFlow(path, t["pert"], operator="B_f0")
    flC, crC = spectralFlow(path, t["pert"], operator="C_f", check_C=False)
    return flB, crB, flC, crC


def test_index_theorem(trajectories, record):
    rows = []
    morse_ok = sign_ok = cross_ok = pos_ok = True
    for t in trajectories:
        rep = indexReport(assembleD(t["path"], t["pert"]))
        want = t["src"].morse_index - t["tgt"].morse_index
        flB, crB, flC, crC = _spectral(t)
        pos = [c["positivity_factor"] for c in crB if "positivity_factor" in c]
        morse_ok &= rep["index"] == want and not rep["ambiguous"]
        # spectralFlow returns -sum sign Gamma
        sign_ok &= rep["index"] == flB
        cross_ok &= len(crB) == len(crC) and flB == flC
        pos_ok &= bool(pos) and min(pos) >= 1 - 1e-9
        rows.append(f"{t['label']}: index {rep['index']}, Morse diff {want}, -sum sign Gamma {flB}")
    n = len(trajectories)
    detail = (f"{n} trajectories; index = Morse difference: {morse_ok}; index = -sum sign Gamma: {sign_ok}; "
              f"B/C crossings agree: {cross_ok}; positivity factor >= 1 - 1e-9: {pos_ok}\n    "
              + "\n    ".join(rows))
    ok = record(6, n >= 10 and morse_ok and sign_ok and cross_ok and pos_ok, "index theorem", detail)
    assert ok


def test_energy_identity(trajectories, record):
    worst, mono = 0.0, -np.inf
    for t in trajectories:
        p, pert = t["path"], t["pert"]
        E = fn.trajectoryEnergy(p, pert)
        worst = max(worst, abs(E["energy"] - E["drop"]) / (1 + abs(E["drop"])))
        acts = np.array([fn.action(p.config(m), pert) for m in range(p.M)])
        mono = max(mono, float(np.max(np.diff(acts))))
    ok = record(7, worst <= 1e-4 and mono <= 1e-8, "energy identity and monotone action",
                f"max |E - drop|/(1+|drop|) = {worst:.2e} (tol 1e-4), max action increase {mono:.2e} (slack 1e-8)")
    assert ok


def test_exponential_decay(trajectories, record):
    r2, rel, fpp = 1.0, 0.0, True
    for t in trajectories:
        fit = decayFit(t["path"])
        gaps = endpointGaps(t["path"], t["pert"])
        for side in ("minus", "plus"):
            f = fit[side]
            r2 = min(r2, f["r2"])
            rel = max(rel, abs(f["delta"] - gaps[side]) / gaps[side])
            fpp &= f["fpp_ok"]
    ok = record(8, r2 >= 0.99 and rel <= 0.15 and fpp, "exponential decay",
                f"min R^2 {r2:.5f} (>= 0.99), max |delta - gap|/gap {rel:.3f} (<= 0.15), f'' >= (0.9 delta)^2 f: {fpp}")
    assert ok


def test_appendix_bounds(trajectories, record):
    b1 = b2 = True
    for t in trajectories:
        B = fn.trajectoryBounds(t["path"], t["pert"], t["src"].value, t["tgt"].value)
        b1 &= B["curvature_ok"]
        b2 &= B["omega_root_ok"]
    ok = record(9, b1 and b2, "curvature and omega bounds", f"curvature inequality: {b1}; omega root-form inequality: {b2}")
    assert ok


def _complex(grid, eps, seed, **kw):
    pert = PerturbationSpec.cos_cos(grid, eps)
    cat = enumerateCritical(pert, grid, n_starts=8, seed=seed)
    cx = buildComplex(cat, pert, seed=seed, **kw)
    return cat, cx, homology(cx)


@pytest.mark.slow
def test_morse_complex(record):
    want = {0: 1, 1: 2, 2: 1}
    runs = []
    for N, seed, kw in ((8, 0, {"check_index": True}), (8, 5, {}), (16, 0, {"S": 20.0, "M": 48})):
        g = TorusGrid(N, N)
        cat, cx, betti = _complex(g, 0.2, seed, **kw)
        oracle = ReducedTorusModel(g, PerturbationSpec.cos_cos(g, 0.2)).homology()[0]
        good = cat.indices == [0, 1, 1, 2] and betti == want == oracle and not cx.partial
        runs.append((f"{N}x{N} seed {seed}", good, cat.indices, betti, oracle))
    detail = "; ".join(f"{name}: indices {ind}, betti {b}, oracle {o}" for name, _, ind, b, o in runs)
    ok = record(10, all(r[1] for r in runs), "Morse complex", detail)
    assert ok


def test_theta_matrix(grid8, cos_cos, cos_cos_points, record):
    cat = enumerateCritical(cos_cos, grid8, n_starts=8, seed=0)
    unit = upper = True
    worst = 0.0
    certs = 0
    for k in (0, 1, 2):
        th = thetaChainMatrix(cat, k, cos_cos, S=6.0, M=12, n_starts=0)
        unit &= th["unit_diagonal"]
        upper &= th["upper_triangular"] and not th["flags"]
        for i, row in enumerate(th["certificates"]):
            for j, c in enumerate(row):
                if c["kind"] == "constant":
                    worst = max(worst, c["residual"], c["matching"])
                elif c["kind"] == "energy":
                    certs += 1
    # below the diagonal in action: every uphill pair is certified empty
    pts = list(cos_cos_points.values())
    uphill = [solveHybrid(a, b, 6.0, 12, cos_cos).status for a in pts for b in pts if b.value > a.value + 1e-10]
    ok = record(11, unit and upper and worst <= 1e-10 and all(s == "empty" for s in uphill),
                "hybrid Theta", f"unit diagonal {unit}, upper triangular {upper}, max constant residual "
                f"{worst:.1e} (tol 1e-10), {certs} same-degree and {len(uphill)} uphill entries energy-certified")
    assert ok


def test_coercivity(grid8, cos_cos, record):
    cat = enumerateCritical(cos_cos, grid8, n_starts=8, seed=0)
    smin = min(coercivityEstimate(c, cos_cos)["sigma_min"] for c in cat)
    flat = coercivityEstimate(Configuration.zero(grid8), None, check=False)["sigma_min"]
    ok = record(12, smin > 1e-6 and flat < 1e-10, "coercivity",
                f"min sigma at regular points {smin:.3e} (> 1e-6), at unperturbed flat point {flat:.1e} (< 1e-10)")
    assert ok
