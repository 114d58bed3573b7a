"""Critical-point catalogs, trajectory counts mod 2 and Z2 Morse homology.

The abelian reduced model at the bottom of the module is an independent
oracle: the perturbation restricted to the torus of flat connections is a
function of the two cycle holonomies, whose gradient lines can be counted
by direct integration.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root

from . import functional as fn
from .critical import NewtonError, fingerprint, findCritical, same_fingerprint
from .flow import TrajectoryError, assembleD, initialPath, numericIndex, solveTrajectory
from .functional import Configuration
from .lie import algebra

__all__ = [
    "Catalog",
    "ChainComplex",
    "ChainError",
    "enumerateCritical",
    "boundaryMatrix",
    "buildComplex",
    "homology",
    "gf2_rank",
    "ReducedTorusModel",
]

log = logging.getLogger(__name__)


class ChainError(RuntimeError):
    """Raised when the boundary operator does not square to zero."""


@dataclass(eq=False)
class Catalog:
    """Critical points below a level, sorted by (index, action)."""

    points: list
    level: float
    regular: bool
    flags: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def degree(self, k):
        return [c for c in self.points if c.morse_index == k]

    @property
    def indices(self):
        return [c.morse_index for c in self.points]

    def by_id(self, i):
        for c in self.points:
            if c.id == i:
                return c
        raise KeyError(i)


@dataclass(eq=False)
class ChainComplex:
    """Generators per degree and Z2 boundary matrices.

    ``boundary[k]`` maps degree ``k`` to degree ``k - 1``; its rows are the
    degree ``k - 1`` generators and its columns the degree ``k`` ones.
    """

    generators: dict
    boundary: dict
    level: float
    partial: bool = False
    flags: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    @property
    def degrees(self):
        return sorted(self.generators)


# -- catalogs ------------------------------------------------------------------
def cycle_angles(cfg):
    """Unwrapped phases ``sum h A`` along the x- and y-cycles through site (0, 0).

    Only meaningful for u(1); used to choose lifts of endpoints.
    """
    g = cfg.grid
    return np.array([g.hx * np.sum(cfg.A[0, :, 0, 0]), g.hy * np.sum(cfg.A[1, 0, :, 0])])


def shift_lift(cfg, k):
    """Gauge-equivalent u(1) representative with cycle phases shifted by ``2 pi k``."""
    g = cfg.grid
    A = cfg.A.copy()
    A[0] += 2 * np.pi * k[0] / g.Lx
    A[1] += 2 * np.pi * k[1] / g.Ly
    return Configuration(g, A, cfg.omega.copy())


def _structured_starts(grid, group):
    d = algebra(group).dim
    out = []
    for t1 in (0.0, np.pi):
        for t2 in (0.0, np.pi):
            A = grid.zeros(1, d)
            # constant connections along one Cartan direction
            A[0, ..., -1] = t1 / grid.Lx
            A[1, ..., -1] = t2 / grid.Ly
            out.append(Configuration(grid, A, grid.zeros(0, d)))
    return out


def _random_start(grid, group, rng, scale):
    d = algebra(group).dim
    A = grid.zeros(1, d)
    A[0] += rng.uniform(-np.pi, np.pi, d) / grid.Lx
    A[1] += rng.uniform(-np.pi, np.pi, d) / grid.Ly
    A += scale * rng.standard_normal(A.shape)
    return Configuration(grid, A, scale * rng.standard_normal(grid.zeros(0, d).shape))


def enumerateCritical(pert, grid, group="u1", a=np.inf, n_starts=16, seed=0, threads=1,
                      noise=0.05, tol=1e-10, eig_tol=1e-8):
    """Multi-start search for critical points with action below ``a``.

    Starts are the four constant connections with cycle phases in {0, pi}
    (jittered) followed by random constant connections plus noise.  Points
    are merged by gauge-invariant fingerprint.  The catalog is a-regular
    when every point found is nondegenerate and, for non-abelian groups,
    irreducible; the abelian constant stabilizer is always present and is
    tested modulo constants instead.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    rng = np.random.default_rng(seed)
    starts = []
    for c in _structured_starts(grid, group):
        c.A += noise * rng.standard_normal(c.A.shape)
        c.omega += noise * rng.standard_normal(c.omega.shape)
        starts.append(c)
    starts += [_random_start(grid, group, rng, noise) for _ in range(max(n_starts - len(starts), 0))]
    starts = starts[:max(n_starts, 4)]

    def run(c):
        try:
            return findCritical(pert, c, tol=tol, eig_tol=eig_tol)
        except (NewtonError, np.linalg.LinAlgError, ValueError):
            return None

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        found = list(ex.map(run, starts))
    pts = []
    failures = 0
    for cp in found:
        if cp is None:
            failures += 1
            continue
        if cp.value >= a:
            continue
        if not any(same_fingerprint(cp.fingerprint, q.fingerprint) for q in pts):
            pts.append(cp)
    pts.sort(key=lambda c: (c.morse_index, c.value, c.fingerprint["x"], c.fingerprint["y"]))
    for i, c in enumerate(pts):
        c.id = i
    problems = []
    for c in pts:
        if not c.flags.get("nondegenerate", False):
            problems.append((c.id, "degenerate"))
        irr = c.flags.get("irreducible_mod_constants", c.flags.get("irreducible"))
        if not irr:
            problems.append((c.id, "reducible"))
    flags = {"starts": len(starts), "failed_starts": failures, "problems": problems}
    if problems:
        log.warning("catalog is not a-regular: %s", problems)
    return Catalog(pts, float(a), not problems and bool(pts), flags)


# -- boundary counts -------------------------------------------------------------
def _lifts(src, tgt, radius):
    """Lifts ``k`` of the target whose cycle phases lie within ``radius`` of the source."""
    ds = cycle_angles(tgt.cfg) - cycle_angles(src.cfg)
    opts = []
    for x in ds:
        k0 = -int(np.round(x / (2 * np.pi)))
        opts.append([k for k in (k0 - 1, k0, k0 + 1) if abs(x + 2 * np.pi * k) <= radius])
    return [(i, j) for i in opts[0] for j in opts[1]]


def _count_pair(src, tgt, pert, S, M, n_starts, radius, seed, check_index):
    abelian = src.cfg.algebra.abelian
    lifts = _lifts(src, tgt, radius) if abelian else [(0, 0)]
    rng = np.random.default_rng(seed)
    found = []
    attempts = []
    for k in lifts:
        end = shift_lift(tgt.cfg, k) if abelian else tgt.cfg
        for n in range(n_starts):
            init = None
            if n:
                # the default guess first, then jittered ones
                p0 = initialPath((src, end), pert, S, M)
                init = p0.replace(A=p0.A + 0.02 * n * rng.standard_normal(p0.A.shape))
            try:
                p = solveTrajectory((src, end), pert, S, M, init=init)
            except TrajectoryError as e:
                attempts.append({"lift": list(k), "start": n, "error": str(e)})
                continue
            fp = fingerprint(p.config(p.M // 2), pert)
            rec = {"lift": list(k), "start": n, "residual": p.residual, "fingerprint": fp}
            if check_index:
                rec["numeric_index"] = numericIndex(assembleD(p, pert))
            attempts.append(rec)
            if not any(same_fingerprint(fp, f["fingerprint"]) for f in found):
                found.append(rec)
    return {"source": src.id, "target": tgt.id, "lifts": [list(k) for k in lifts],
            "trajectories": found, "attempts": attempts, "count": len(found)}


def boundaryMatrix(catalog, k, pert, S=25.0, M=64, n_starts=1, lift_radius=np.pi + 1e-6,
                   seed=0, threads=1, check_index=False):
    """Z2 matrix of the boundary from degree ``k`` to degree ``k - 1``.

    Every index-difference-one pair is handed to :func:`solveTrajectory`
    for each admissible lift of the target (u(1): lifts whose cycle phases
    differ from the source by at most ``lift_radius``) and each start.
    Solutions are merged by the fingerprint of the middle slice, which the
    phase condition pins at the mean action level.

    Returns ``(matrix, details)``; ``details["partial"]`` is set when a pair
    produced no solution in any attempt while at least one lift was tried,
    so that a zero entry is not certified.
    """
    if not catalog.regular:
        raise ValueError("catalog is not a-regular; resample the perturbation")
    cols = catalog.degree(k)
    rows = catalog.degree(k - 1)
    mat = np.zeros((len(rows), len(cols)), dtype=np.int64)
    if not rows or not cols:
        return mat, {"pairs": [], "partial": False, "flags": []}
    jobs = [(i, j) for j in range(len(cols)) for i in range(len(rows))]
    ss = np.random.SeedSequence(seed).spawn(len(jobs))

    def run(t):
        (i, j), s = t
        return _count_pair(cols[j], rows[i], pert, S, M, n_starts, lift_radius,
                           s.generate_state(1)[0], check_index)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        res = list(ex.map(run, zip(jobs, ss)))
    flags = []
    for (i, j), r in zip(jobs, res):
        mat[i, j] = r["count"] % 2
        if r["lifts"] and r["count"] == 0:
            flags.append({"pair": [cols[j].id, rows[i].id], "reason": "no trajectory found"})
        bad = [a for a in r["trajectories"] if a.get("numeric_index", 1) != 1]
        if bad:
            flags.append({"pair": [cols[j].id, rows[i].id], "reason": "numeric index not 1"})
    return mat, {"pairs": res, "partial": bool(flags), "flags": flags}


def gf2_rank(Mx):
    """Rank over Z2 by Gaussian elimination."""
    A = (np.asarray(Mx, dtype=np.int64) % 2).astype(bool)
    A = A.copy()
    r = 0
    nr, nc = A.shape if A.ndim == 2 else (0, 0)
    for c in range(nc):
        piv = np.nonzero(A[r:, c])[0]
        if len(piv) == 0:
            continue
        p = r + piv[0]
        A[[r, p]] = A[[p, r]]
        below = np.nonzero(A[:, c])[0]
        for q in below:
            if q != r:
                A[q] ^= A[r]
        r += 1
        if r == nr:
            break
    return r


def buildComplex(catalog, pert, **kw):
    """Chain complex of the catalog with boundaries from :func:`boundaryMatrix`."""
    gens = {}
    for c in catalog:
        gens.setdefault(c.morse_index, []).append(c.id)
    bd, counts, flags = {}, {}, []
    for k in sorted(gens):
        if k - 1 in gens:
            m, det = boundaryMatrix(catalog, k, pert, **kw)
            bd[k] = m
            counts[k] = det["pairs"]
            flags += det["flags"]
    return ChainComplex(gens, bd, catalog.level, bool(flags), flags, counts)


def homology(cx):
    """Betti numbers over Z2, after checking that the boundary squares to zero.

    Returns a dict ``{degree: betti}`` over all degrees with generators.
    """
    for k, m in cx.boundary.items():
        if k + 1 in cx.boundary:
            comp = (m @ cx.boundary[k + 1]) % 2
            if np.any(comp):
                raise ChainError(f"boundary_{k} o boundary_{k + 1} != 0 mod 2:\n{comp}")
    betti = {}
    for k in cx.degrees:
        n = len(cx.generators[k])
        rk = gf2_rank(cx.boundary[k]) if k in cx.boundary else 0
        rk_up = gf2_rank(cx.boundary[k + 1]) if k + 1 in cx.boundary else 0
        betti[k] = n - rk - rk_up
    return betti


# -- reduced oracle ------------------------------------------------------------------
class ReducedTorusModel:
    """Morse function ``f(theta1, theta2)`` on the flat moduli torus of u(1).

    ``f`` is the perturbed action of the constant connection with cycle
    phases ``theta`` and ``omega = 0``.  Critical points, indices, gradient
    lines between consecutive indices and Z2 homology are all computed in
    two dimensions.
    """

    def __init__(self, grid, pert, level=np.inf):
        self.grid, self.pert, self.level = grid, pert, level

    def f(self, th):
        g = self.grid
        A = g.zeros(1, 1)
        A[0] = th[0] / g.Lx
        A[1] = th[1] / g.Ly
        return fn.action(Configuration(g, A, g.zeros(0, 1)), self.pert)

    def grad(self, th, h=1e-6):
        e = np.eye(2) * h
        return np.array([(self.f(th + e[i]) - self.f(th - e[i])) / (2 * h) for i in range(2)])

    def hess(self, th, h=1e-4):
        e = np.eye(2) * h
        H = np.array([(self.grad(th + e[i]) - self.grad(th - e[i])) / (2 * h) for i in range(2)])
        return 0.5 * (H + H.T)

    def critical_points(self, n=24, tol=1e-9):
        pts = []
        ts = np.linspace(0, 2 * np.pi, n, endpoint=False)
        for a in ts:
            for b in ts:
                sol = root(self.grad, [a, b], tol=1e-12)
                if not sol.success or np.max(np.abs(self.grad(sol.x))) > 1e-7:
                    continue
                x = np.mod(sol.x, 2 * np.pi)
                if any(np.max(np.abs(np.angle(np.exp(1j * (x - p))))) < 1e-5 for p in pts):
                    continue
                pts.append(x)
        out = []
        for x in pts:
            w = np.linalg.eigvalsh(self.hess(x))
            if np.min(np.abs(w)) < tol:
                raise ValueError(f"degenerate reduced critical point at {x}")
            v = self.f(x)
            if v < self.level:
                out.append({"theta": x, "value": v, "index": int(np.sum(w < 0))})
        out.sort(key=lambda c: (c["index"], c["value"], tuple(c["theta"])))
        return out

    def _descend(self, x0, sign, T=200.0):
        fun = lambda t, x: -sign * self.grad(x)
        sol = solve_ivp(fun, (0, T), x0, rtol=1e-10, atol=1e-12)
        return sol.y[:, -1]

    def _which(self, x, pts):
        d = [np.max(np.abs(np.angle(np.exp(1j * (x - p["theta"]))))) for p in pts]
        i = int(np.argmin(d))
        return i if d[i] < 1e-3 else None

    def counts(self, step=1e-4):
        """Gradient-line counts ``n(x, y)`` for ``ind x = ind y + 1``.

        Index-1 points send their two unstable branches downhill and their
        two stable branches uphill; every gradient line between consecutive
        indices in two dimensions is one of these branches.
        """
        pts = self.critical_points()
        n = {}
        for i, p in enumerate(pts):
            if p["index"] != 1:
                continue
            w, V = np.linalg.eigh(self.hess(p["theta"]))
            for vec, sign, up in ((V[:, 0], 1, False), (V[:, 1], -1, True)):
                for s in (1, -1):
                    x = self._descend(p["theta"] + s * step * vec, sign)
                    j = self._which(x, pts)
                    if j is None:
                        continue
                    key = (j, i) if up else (i, j)
                    n[key] = n.get(key, 0) + 1
        return pts, n

    def homology(self):
        pts, n = self.counts()
        gens = {}
        for i, p in enumerate(pts):
            gens.setdefault(p["index"], []).append(i)
        bd = {}
        for k in gens:
            if k - 1 in gens:
                bd[k] = np.array([[n.get((c, r), 0) % 2 for c in gens[k]] for r in gens[k - 1]],
                                 dtype=np.int64)
        cx = ChainComplex(gens, bd, self.level)
        return homology(cx), pts, n
