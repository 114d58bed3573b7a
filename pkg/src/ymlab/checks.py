"""Invariant checks on random inputs, shared by the ``check`` task and the tests.

Each check returns a dict with the measured ``value``, the ``tol`` it is
compared to and ``ok``.
"""
import numpy as np

from . import functional as fn
from . import lattice as lat
from .critical import checkEigenReduction, hellmannFeynman, assembleB
from .functional import Configuration, Loop, PerturbationSpec
from .lie import algebra

__all__ = [
    "winding_perturbation",
    "adjointness",
    "gradient_consistency",
    "energy_inequality",
    "gauge_invariance",
    "eigen_reduction",
    "hellmann_feynman",
    "run_suite",
]


def _result(value, tol, ok=None, **extra):
    ok = bool(value <= tol) if ok is None else bool(ok)
    return {"value": float(value), "tol": float(tol), "ok": ok, **extra}


def winding_perturbation(grid, eps=0.3):
    """A mixed perturbation: a plaquette rectangle winding once in t and a plain x-cycle."""
    return PerturbationSpec([Loop.rectangle(1, 1, 2, 2, winding=1), Loop.x_cycle(grid, 2)],
                            [0.7, -0.4], ["re-trace", "re-trace-squared"], eps)


def adjointness(grid, group, n=1000, seed=0, tol=1e-13):
    """Relative defect of ``<d_A phi, a> = <phi, d_A^* a>`` and ``<d_A a, b> = <a, d_A^* b>``."""
    rng = np.random.default_rng(seed)
    d = algebra(group).dim
    worst = 0.0
    for _ in range(n):
        A = grid.random(1, d, rng)
        phi, a, b = grid.random(0, d, rng), grid.random(1, d, rng), grid.random(0, d, rng)
        l1 = grid.inner(lat.covD0(grid, A, phi), a, 1)
        r1 = grid.inner(phi, lat.coD1(grid, A, a), 0)
        l2 = grid.inner(lat.covD1(grid, A, a), b, 2)
        r2 = grid.inner(a, lat.coD2(grid, A, b), 1)
        s1 = grid.norm(lat.covD0(grid, A, phi), 1) * grid.norm(a, 1)
        s2 = grid.norm(lat.covD1(grid, A, a), 2) * grid.norm(b, 2)
        worst = max(worst, abs(l1 - r1) / s1, abs(l2 - r2) / s2)
    return _result(worst, tol, group=group, samples=n)


def gradient_consistency(grid, group, pert=None, n=100, seed=0, h=1e-5, tol=1e-6, scale=0.5):
    """Central-difference directional derivatives of ``J + h`` against ``<grad, xi>``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        c = Configuration.random(grid, group, rng, scale)
        xi = Configuration.random(grid, group, rng, 1.0)
        gA, gw = fn.gradient(c, pert)
        exact = grid.inner(gA, xi.A, 1) + grid.inner(gw, xi.omega, 0)
        fd = (fn.action(c + xi.scaled(h), pert) - fn.action(c + xi.scaled(-h), pert)) / (2 * h)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-300))
    return _result(worst, tol, group=group, samples=n)


def energy_inequality(grid, group, n=1000, seed=0, tol=1e-12, scale=1.0):
    """``J(A, omega) <= YM(A)`` and ``J(theta(A)) = YM(A)`` on random pairs."""
    rng = np.random.default_rng(seed)
    worst_ineq, worst_eq = -np.inf, 0.0
    for _ in range(n):
        c = Configuration.random(grid, group, rng, scale)
        ym = fn.evalYM(grid, c.A)
        worst_ineq = max(worst_ineq, fn.evalJ(c) - ym)
        w = lat.hodge(grid, lat.curvature(grid, c.A), 2)
        eq = abs(fn.evalJ(Configuration(grid, c.A, w)) - ym) / (1 + abs(ym))
        worst_eq = max(worst_eq, eq)
    ok = worst_ineq <= 0 and worst_eq <= tol
    return _result(worst_eq, tol, ok, max_J_minus_YM=float(worst_ineq), group=group, samples=n)


def gauge_invariance(grid, group, pert=None, n=5, seed=0, tol=1e-10, scale=0.3, gauge_scale=0.5):
    """``J + h`` unchanged by random lattice gauge transformations.

    Exact for u(1) as long as neighbouring phases differ by less than pi, so
    that no link wraps.  For su(2) the pointwise brackets make it O(h).
    """
    rng = np.random.default_rng(seed)
    g = algebra(group)
    worst = 0.0
    for _ in range(n):
        c = Configuration.random(grid, group, rng, scale)
        gf = g.random_group(grid.shape, rng, gauge_scale)
        v0 = fn.action(c, pert)
        v1 = fn.action(fn.gaugeAct(gf, c), pert)
        worst = max(worst, abs(v1 - v0) / (1 + abs(v0)))
    return _result(worst, tol, group=group, samples=n)


def eigen_reduction(cfg, pert=None, tol=1e-8):
    """Eigenpairs of ``B_{f,0}`` against solutions of ``C_{f,lambda}``, both ways."""
    rep = checkEigenReduction(cfg, pert, tol=tol)
    worst = max(rep["max_forward_residual"], rep["max_backward_residual"])
    return _result(worst, tol, rep["passed"], **rep)


def hellmann_feynman(cfg0, cfg1, pert=None, s0=0.37, n_branches=5, tol=1e-4):
    """Eigenvalue slopes of ``B`` along the segment from ``cfg0`` to ``cfg1``."""

    def family(s):
        c = Configuration(cfg0.grid, (1 - s) * cfg0.A + s * cfg1.A, (1 - s) * cfg0.omega + s * cfg1.omega)
        return assembleB(c, pert).dense()

    w = np.linalg.eigvalsh(family(s0))
    gaps = np.minimum(np.abs(np.diff(w))[:-1], np.abs(np.diff(w))[1:])
    # the most isolated interior branches that actually move
    cand = [k for k in np.argsort(-gaps)[:4 * n_branches] if gaps[k] > 1e-4]
    cand = np.array(cand, dtype=int) + 1
    out = hellmannFeynman(family, s0, sorted(int(k) for k in cand))
    out = [r for r in out if abs(r["slope_hf"]) > 1e-3][:n_branches]
    if len(out) < n_branches:
        raise ValueError(f"only {len(out)} simple moving branches found")
    worst = max(r["rel_err"] for r in out)
    return _result(worst, tol, branches=out)


def run_suite(grid, pert=None, seed=0, n=100, groups=("u1", "su2")):
    """All random-input invariants; ``n`` scales the sample counts."""
    res = {}
    for gname in groups:
        res[f"adjointness_{gname}"] = adjointness(grid, gname, n, seed)
        res[f"gradient_{gname}"] = gradient_consistency(grid, gname, pert if gname == "u1" or pert is None
                                                        else None, max(n // 10, 5), seed)
        res[f"gradient_winding_{gname}"] = gradient_consistency(grid, gname, winding_perturbation(grid),
                                                                max(n // 10, 5), seed + 1)
        res[f"energy_inequality_{gname}"] = energy_inequality(grid, gname, n, seed)
    res["gauge_invariance_u1"] = gauge_invariance(grid, "u1", winding_perturbation(grid), 5, seed)
    rng = np.random.default_rng(seed)
    c = Configuration.random(grid, "u1", rng, 0.5)
    res["eigen_reduction_u1"] = eigen_reduction(c, pert)
    # a conformal factor splits the lattice degeneracies of the abelian spectrum
    gu = lat.TorusGrid(grid.Nx, grid.Ny, grid.Lx, grid.Ly, 0.3 * rng.standard_normal(grid.shape))
    res["hellmann_feynman_su2"] = hellmann_feynman(Configuration.random(gu, "su2", rng, 0.5),
                                                   Configuration.random(gu, "su2", rng, 0.5))
    return res
