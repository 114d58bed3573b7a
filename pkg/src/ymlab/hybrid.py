"""Parabolic Yang-Mills flow, the comparison map theta and hybrid trajectories.

The parabolic side is the gradient flow of ``YM + h`` in A alone,

    dA/ds + d_A^* F_A - X_f(A) = 0,

with an A-only holonomy perturbation shared with the elliptic side.  The
map ``theta(A) = (A, *F_A)`` sends it to the elliptic configuration space;
``J(theta(A)) = YM(A)`` and ``J(A, omega) <= YM(A)`` for every omega.

A hybrid trajectory runs the parabolic flow on ``s <= 0`` out of a critical
point ``A-`` and the elliptic flow on ``s >= 0`` into ``(B+, omega+)``, with
``(B(0), omega(0)) = theta(A(0))``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import lattice as lat
from . import functional as fn
from .functional import Configuration, GL3_NODES, GL3_WEIGHTS
from .critical import (CriticalPoint, operatorBlocks, _stabilizer_vector,
                       _complement_basis, _pack, fingerprint, same_fingerprint)
from .flow import TemporalPath, TrajectoryError, _BoxScheme, _solve_linear, constantPath

__all__ = [
    "ParabolicPath",
    "HybridTrajectory",
    "ParabolicError",
    "theta",
    "parabolicValue",
    "parabolicGradient",
    "solveParabolic",
    "solveHybrid",
    "thetaChainMatrix",
]


class ParabolicError(RuntimeError):
    """Step rejection cascade in the parabolic integrator."""


def theta(grid, A):
    """``A -> (A, *F_A)``."""
    return Configuration(grid, np.array(A, copy=True), lat.hodge(grid, lat.curvature(grid, A), 2))


def _check_pert(pert):
    if pert is not None and pert.omega_dependent:
        raise ValueError("the parabolic side needs an A-only perturbation (no t-winding loops)")


def parabolicValue(grid, A, pert=None):
    """``YM(A) + h(A)``."""
    h = fn.holonomyPerturbation(Configuration(grid, A, np.zeros(A.shape[1:])), pert)[0] \
        if pert is not None and pert.active else 0.0
    return fn.evalYM(grid, A) + h


def parabolicGradient(grid, A, pert=None):
    """L2 gradient ``d_A^* F_A - X_f`` of ``YM + h``."""
    F = lat.curvature(grid, A)
    _, X, _ = fn.holonomyPerturbation(Configuration(grid, A, np.zeros(A.shape[1:])), pert)
    return lat.coD2(grid, A, F) - X


@dataclass(eq=False)
class ParabolicPath:
    """Samples of a parabolic flow line on ``[-S, 0]``."""

    grid: lat.TorusGrid
    s: np.ndarray
    A: np.ndarray
    values: np.ndarray
    endpoint_id: int = -1
    Psi: np.ndarray = None
    info: dict = field(default_factory=dict)

    @property
    def M(self):
        return len(self.s)

    def monotone(self, slack=1e-8):
        return bool(np.all(np.diff(self.values) <= slack))


def _linear_part(grid, dim):
    """Eigen-decomposition of ``d^* d`` on 1-forms at A = 0, orthonormal coordinates."""
    key = ("par_linear", dim)
    if key not in grid._cache:
        b = operatorBlocks(Configuration.zero(grid, "u1" if dim == 1 else "su2"), None, False)
        L = (b["S"].T @ b["S"]).toarray()
        grid._cache[key] = np.linalg.eigh(0.5 * (L + L.T))
    return grid._cache[key]


def _phi1(x):
    out = np.ones_like(x)
    big = np.abs(x) > 1e-8
    out[big] = np.expm1(x[big]) / x[big]
    out[~big] = 1 + x[~big] / 2
    return out


def solveParabolic(grid, A0, S, M, pert=None, dt=None, dt_min=1e-10, slack=1e-13):
    """Integrate the parabolic flow from ``A(-S) = A0`` to ``s = 0``.

    Exponential Euler: the stiff linear part ``d^* d`` is integrated exactly
    through its eigen-decomposition, the bracket and perturbation terms are
    explicit.  A step is accepted when ``YM + h`` does not increase
    (relative slack ``slack``); otherwise it is halved.

    Raises
    ------
    ParabolicError
        When the step falls below ``dt_min``.
    """
    _check_pert(pert)
    A0 = np.asarray(A0, float)
    d = A0.shape[-1]
    lam, V = _linear_part(grid, d)
    r1 = grid.sqrt_weight(1, d)
    s = np.linspace(-S, 0.0, M)
    h_out = s[1] - s[0] if M > 1 else S
    h = h_out if dt is None else min(dt, h_out)
    A = A0.copy()
    E = parabolicValue(grid, A, pert)
    out, vals = [A.copy()], [E]
    steps = rejects = 0
    for k in range(M - 1):
        left = s[k + 1] - s[k]
        while left > 1e-15:
            hk = min(h, left)
            z = r1 * A.ravel()
            g = r1 * parabolicGradient(grid, A, pert).ravel()
            Nz = g - V @ (lam * (V.T @ z))
            c = V.T @ z
            cn = np.exp(-hk * lam) * c - hk * _phi1(-hk * lam) * (V.T @ Nz)
            zn = V @ cn
            An = (zn / r1).reshape(A.shape)
            En = parabolicValue(grid, An, pert)
            if En <= E + slack * (1 + abs(E)):
                A, E = An, En
                left -= hk
                steps += 1
                h = min(2 * hk, h_out if dt is None else dt)
            else:
                rejects += 1
                h = hk / 2
                if h < dt_min:
                    raise ParabolicError(f"step size fell below {dt_min:g} at s = {s[k] + (s[k+1]-s[k]-left):.4g}")
        out.append(A.copy())
        vals.append(E)
    return ParabolicPath(grid, s, np.array(out), np.array(vals),
                         info={"steps": steps, "rejected": rejects})


# -- hybrid boundary value problem -------------------------------------------------
class _ParabolicBox:
    """Box scheme for ``d/ds (A, Psi) + V(A, Psi) = 0`` with the gauge row.

    ``V = (grad(YM + h) - d_A Psi, -d_{A_r}^*(A - A_r))`` in orthonormal
    coordinates; linearization ``[[H + [Psi, .], -G], [-G_r^T, 0]]``.
    Left projection condition at the source; for u(1) the constant Psi is
    pinned as in the elliptic scheme.
    """

    def __init__(self, grid, dim, s, pert, A_minus, ref, eig_floor=1e-9):
        self.grid, self.d, self.s, self.pert = grid, dim, np.asarray(s, float), pert
        self.M = len(s)
        self.ds = np.diff(self.s)
        self.n1, self.n0 = grid.size(1, dim), grid.size(0, dim)
        self.N = self.n1 + self.n0
        self.ref = ref
        self.quotient = dim == 1
        self.r1, self.r0 = grid.sqrt_weight(1, dim), grid.sqrt_weight(0, dim)
        self.yL = np.concatenate([self.r1 * A_minus.ravel(), np.zeros(self.n0)])
        Bp = self._jac(A_minus, np.zeros(self.n0), A_minus).toarray()
        if self.quotient:
            q = np.zeros(self.N)
            q[self.n1:] = _stabilizer_vector(grid, dim)
            self.q = q
            Q = _complement_basis(q)
            w, U = np.linalg.eigh(Q.T @ Bp @ Q)
            U = Q @ U
        else:
            w, U = np.linalg.eigh(Bp)
        if np.min(np.abs(w)) < eig_floor:
            raise TrajectoryError("parabolic endpoint operator is singular")
        self.spec = w
        self.PL = U[:, w > 0]
        self.n_mu = self.M - 1 if self.quotient else 0
        self.n_stab = self.M if self.quotient else 0
        self.cols = self.M * self.N + self.n_mu

    def _split_slice(self, z):
        A = (z[:self.n1] / self.r1).reshape(2, *self.grid.shape, self.d)
        P = (z[self.n1:] / self.r0).reshape(*self.grid.shape, self.d)
        return A, P

    def _jac(self, A, P_on, Ar):
        grid, d = self.grid, self.d
        b = operatorBlocks(theta(grid, A), self.pert, include_Y=False)
        H = b["S"].T @ b["S"] + b["M"] + b["HAA"]
        P = (P_on / self.r0).reshape(*grid.shape, d)
        if np.any(P):
            aP = lat.ad_field(P)
            H = H + sp.block_diag([aP, aP])
        Gr = lat.orthonormal(grid, lat.covD0_matrix(grid, Ar), 1, 0, d)
        return sp.bmat([[H, -b["G"]], [-Gr.T, None]], format="csr")

    def _node(self, z, zr, jac):
        grid = self.grid
        A, P = self._split_slice(z)
        Ar, _ = self._split_slice(zr)
        rA = parabolicGradient(grid, A, self.pert) - lat.covD0(grid, A, P)
        rP = -lat.coD1(grid, Ar, A - Ar)
        v = np.concatenate([self.r1 * rA.ravel(), self.r0 * rP.ravel()])
        return v, (self._jac(A, z[self.n1:], Ar) if jac else None)

    def split(self, Y):
        return Y[:self.M * self.N].reshape(self.M, self.N), Y[self.M * self.N:]

    def evaluate(self, Y, jac=True):
        M, N = self.M, self.N
        Ys, mu = self.split(Y)
        R, rows, cols, vals = [], [], [], []
        I = sp.identity(N, format="csr")

        def put(block, r0, c0):
            c = block.tocoo()
            rows.append(c.row + r0)
            cols.append(c.col + c0)
            vals.append(c.data)

        for m in range(M - 1):
            h = self.ds[m]
            acc = np.zeros(N)
            J0, J1 = -I / h, I / h
            for t, wq in zip(GL3_NODES, GL3_WEIGHTS):
                v, J = self._node((1 - t) * Ys[m] + t * Ys[m + 1],
                                  (1 - t) * self.ref[m] + t * self.ref[m + 1], jac)
                acc += wq * v
                if jac:
                    J0 = J0 + (wq * (1 - t)) * J
                    J1 = J1 + (wq * t) * J
            r = (Ys[m + 1] - Ys[m]) / h + acc
            if self.quotient:
                r = r + mu[m] * self.q
            R.append(r)
            if jac:
                put(J0, m * N, m * N)
                put(J1, m * N, (m + 1) * N)
                if self.quotient:
                    nz = np.nonzero(self.q)[0]
                    rows.append(m * N + nz)
                    cols.append(np.full(len(nz), M * N + m))
                    vals.append(self.q[nz])
        r0 = (M - 1) * N
        if self.quotient:
            R.append(Ys @ self.q)
            if jac:
                nz = np.nonzero(self.q)[0]
                for m in range(M):
                    rows.append(np.full(len(nz), r0 + m))
                    cols.append(m * N + nz)
                    vals.append(self.q[nz])
            r0 += M
        R.append(self.PL.T @ (Ys[0] - self.yL))
        if jac:
            put(sp.csr_matrix(self.PL.T), r0, 0)
        r0 += self.PL.shape[1]
        res = np.concatenate(R)
        if not jac:
            return res, None
        J = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(r0, self.cols))
        return res, J


@dataclass(eq=False)
class HybridTrajectory:
    """Parabolic half on ``s <= 0``, elliptic half on ``s >= 0``."""

    parabolic: ParabolicPath
    elliptic: TemporalPath
    matching_residual: float
    residual: float
    status: str = "found"
    info: dict = field(default_factory=dict)

    def junction_values(self, pert=None):
        """``(YM + h)(A(0))`` and ``(J + h)(B(0), omega(0))``."""
        g = self.parabolic.grid
        return (parabolicValue(g, self.parabolic.A[-1], pert),
                fn.action(self.elliptic.config(0), pert))


class _HybridScheme:
    """Both halves plus the matching rows ``A_e(0) = A_p(0)``, ``omega_e(0) = *F(A_p(0))``.

    For u(1) the constant part of the omega matching is dropped: the mean of
    omega is forced to vanish on the elliptic side.  ``Psi`` is matched too;
    without it the gauge modes ``phi`` with a kink at the junction are
    undetermined.  The resulting system is overdetermined and is solved in
    the least-squares sense.
    """

    def __init__(self, grid, dim, sp_, se, pert, src, tgt, ref_p, ref_e, phase=None):
        self.par = _ParabolicBox(grid, dim, sp_, pert, src.A, ref_p)
        self.ell = _BoxScheme(grid, dim, se, pert, (theta(grid, src.A), tgt), ref_e)
        self.grid, self.d, self.pert = grid, dim, pert
        self.phase = phase
        n1, n0 = grid.size(1, dim), grid.size(0, dim)
        self.n1, self.n0 = n1, n0
        self.Wq = _complement_basis(_stabilizer_vector(grid, dim)) if dim == 1 else None
        e = self.ell
        nL = e.PL.shape[1]
        r0 = (e.M - 1) * e.N + e.n_stab
        keep = np.ones(e.rows_core, bool)
        keep[r0:r0 + nL] = False
        self.ell_keep = np.nonzero(keep)[0]
        self.cp = self.par.cols
        self.cols = self.par.cols + e.cols

    def evaluate(self, Y, jac=True):
        p, e = self.par, self.ell
        Yp, Ye = Y[:self.cp], Y[self.cp:]
        rp, Jp = p.evaluate(Yp, jac)
        re_, Je = e.evaluate(Ye, jac, with_phase=False)
        re_ = re_[self.ell_keep]
        grid, d, n1, n0 = self.grid, self.d, self.n1, self.n0
        zp = p.split(Yp)[0][-1]
        ze = e.split(Ye)[0][0]
        A, _ = p._split_slice(zp)
        r0w = grid.sqrt_weight(0, d)
        w_target = r0w * lat.hodge(grid, lat.curvature(grid, A), 2).ravel()
        rA = ze[:n1] - zp[:n1]
        rw = ze[n1:n1 + n0] - w_target
        if self.Wq is not None:
            rw = self.Wq.T @ rw
        rP = ze[n1 + n0:n1 + 2 * n0] - zp[n1:n1 + n0]
        if self.Wq is not None:
            rP = self.Wq.T @ rP
        R = [rp, re_, rA, rw, rP]
        if self.phase is not None:
            R.append(np.array([parabolicValue(grid, A, self.pert) - self.phase]))
        res = np.concatenate(R)
        if not jac:
            return res, None
        # derivative of *F(A) in orthonormal coordinates
        Sraw = sp.diags(np.repeat(np.exp(-2 * grid.u).ravel(), d)) @ lat.covD1_matrix(grid, A)
        S = sp.diags(r0w) @ Sraw @ sp.diags(1 / grid.sqrt_weight(1, d))
        Np, Ne = p.N, e.N
        offp = (p.M - 1) * Np
        I1 = sp.identity(n1, format="csr")
        JA = sp.hstack([sp.csr_matrix((n1, offp)), -I1, sp.csr_matrix((n1, n0 + p.n_mu)),
                        I1, sp.csr_matrix((n1, e.cols - n1))], format="csr")
        Ww = sp.identity(n0, format="csr") if self.Wq is None else sp.csr_matrix(self.Wq.T)
        Jw = sp.hstack([sp.csr_matrix((Ww.shape[0], offp)), -Ww @ S,
                        sp.csr_matrix((Ww.shape[0], n0 + p.n_mu + n1)), Ww,
                        sp.csr_matrix((Ww.shape[0], e.cols - n1 - n0))], format="csr")
        JP = sp.lil_matrix((Ww.shape[0], self.cols))
        JP[:, offp + n1:offp + n1 + n0] = -Ww
        JP[:, p.cols + n1 + n0:p.cols + n1 + 2 * n0] = Ww
        Jm = sp.vstack([sp.hstack([Jp, sp.csr_matrix((Jp.shape[0], e.cols))]),
                        sp.hstack([sp.csr_matrix((len(self.ell_keep), p.cols)), Je[self.ell_keep]]),
                        JA, Jw, JP.tocsr()], format="csr")
        if self.phase is not None:
            g = np.zeros(self.cols)
            g[offp:offp + n1] = grid.sqrt_weight(1, d) * parabolicGradient(grid, A, self.pert).ravel()
            Jm = sp.vstack([Jm, sp.csr_matrix(g)], format="csr")
        return res, Jm


def _same_point(a, b):
    return a is b or (a.grid is b.grid and np.allclose(a.A, b.A, atol=1e-12, rtol=0)
                      and np.allclose(a.omega, b.omega, atol=1e-12, rtol=0))


def _as_cfg(x):
    return x.cfg if isinstance(x, CriticalPoint) else x


def _value(x, pert):
    return x.value if isinstance(x, CriticalPoint) else fn.action(x, pert)


def hybridResidual(parabolic, elliptic, pert=None):
    """Max-norm residual of both halves and the matching condition.

    Flow residuals use the segment-averaged vector fields, as in the
    solvers; the matching residual is ``|theta(A(0)) - (B(0), omega(0))|``.
    """
    grid = parabolic.grid
    rmax = 0.0
    for m in range(parabolic.M - 1):
        h = parabolic.s[m + 1] - parabolic.s[m]
        acc = np.zeros_like(parabolic.A[0])
        for t, wq in zip(GL3_NODES, GL3_WEIGHTS):
            A = (1 - t) * parabolic.A[m] + t * parabolic.A[m + 1]
            P = 0 if parabolic.Psi is None else (1 - t) * parabolic.Psi[m] + t * parabolic.Psi[m + 1]
            acc += wq * (parabolicGradient(grid, A, pert)
                         - (0 if parabolic.Psi is None else lat.covD0(grid, A, P)))
        rmax = max(rmax, float(np.max(np.abs((parabolic.A[m + 1] - parabolic.A[m]) / h + acc))))
    for m in range(elliptic.M - 1):
        h = elliptic.s[m + 1] - elliptic.s[m]
        aA = np.zeros_like(elliptic.A[0])
        aw = np.zeros_like(elliptic.omega[0])
        for t, wq in zip(GL3_NODES, GL3_WEIGHTS):
            c = Configuration(grid, (1 - t) * elliptic.A[m] + t * elliptic.A[m + 1],
                              (1 - t) * elliptic.omega[m] + t * elliptic.omega[m + 1])
            P = (1 - t) * elliptic.Psi[m] + t * elliptic.Psi[m + 1]
            gA, gw = fn.gradient(c, pert)
            aA += wq * (gA - lat.covD0(grid, c.A, P))
            aw += wq * (gw + c.algebra.bracket(P, c.omega))
        rmax = max(rmax, float(np.max(np.abs((elliptic.A[m + 1] - elliptic.A[m]) / h + aA))),
                   float(np.max(np.abs((elliptic.omega[m + 1] - elliptic.omega[m]) / h + aw))))
    th = theta(grid, parabolic.A[-1])
    match = max(float(np.max(np.abs(th.A - elliptic.A[0]))), float(np.max(np.abs(th.omega - elliptic.omega[0]))))
    return rmax, match


def solveHybrid(source, target, S, M, pert=None, tol=1e-8, maxit=40, phase=None, init_t=0.5,
                jitter=0.0, rng=None, energy_tol=1e-10):
    """Hybrid trajectory from ``A-`` (parabolic) to ``(B+, omega+)`` (elliptic).

    Returns a :class:`HybridTrajectory` whose ``status`` is

    * ``"constant"``: source and target agree under theta; the constant
      concatenation, with its residual,
    * ``"empty"``: certified empty by the energy obstruction
      ``(J + h)(target) < (J + h)(source)`` being violated,
    * ``"found"``: a Newton solution of the coupled problem.

    ``phase`` fixes ``(YM + h)(A(0))``, for index-one problems.

    Raises
    ------
    TrajectoryError
        Newton divergence or singular linearization.
    """
    _check_pert(pert)
    src, tgt = _as_cfg(source), _as_cfg(target)
    grid, d = src.grid, src.dim
    vs, vt = _value(source, pert), _value(target, pert)
    th = theta(grid, src.A)
    sp_ = np.linspace(-S, 0.0, M)
    se = np.linspace(0.0, S, M)
    if _same_point(th, tgt) or (_same_point(src, tgt) and np.allclose(th.omega, tgt.omega, atol=1e-10)):
        par = ParabolicPath(grid, sp_, np.repeat(src.A[None], M, 0),
                            np.full(M, parabolicValue(grid, src.A, pert)), Psi=np.zeros((M,) + src.omega.shape))
        ell = constantPath(tgt, S, M)
        ell.s = se
        res, match = hybridResidual(par, ell, pert)
        return HybridTrajectory(par, ell, match, res, "constant")
    if vt > vs - energy_tol:
        return HybridTrajectory(None, None, np.nan, np.nan, "empty",
                                {"certificate": "energy", "source_value": vs, "target_value": vt})
    rng = np.random.default_rng(rng)
    prob = _HybridScheme(grid, d, sp_, se, pert, src, tgt, None, None, phase)
    # initial guess: exponential halves through an intermediate connection,
    # with the slowest unstable rate at the source and stable rate at the target
    wp, we = prob.par.spec, prob.ell.specR
    rp = float(np.min(-wp[wp < 0])) if np.any(wp < 0) else 0.5
    re_ = float(np.min(we[we > 0])) if np.any(we > 0) else 0.5
    Amid = (1 - init_t) * src.A + init_t * tgt.A
    if jitter:
        Amid = Amid + jitter * rng.standard_normal(Amid.shape)
    r1 = grid.sqrt_weight(1, d)
    n0 = grid.size(0, d)
    zL = np.concatenate([r1 * src.A.ravel(), np.zeros(n0)])
    zM = np.concatenate([r1 * Amid.ravel(), np.zeros(n0)])
    tp = (np.exp(rp * sp_) - np.exp(-rp * S)) / (1 - np.exp(-rp * S))
    Yp0 = zL[None] + (zM - zL)[None] * tp[:, None]
    cmid = theta(grid, Amid)
    yM = _pack(grid, cmid, np.zeros_like(cmid.omega))
    yT = _pack(grid, tgt, np.zeros_like(tgt.omega))
    te = (np.exp(-re_ * se) - np.exp(-re_ * S)) / (1 - np.exp(-re_ * S))
    Ye0 = yT[None] + (yM - yT)[None] * te[:, None]
    prob.par.ref, prob.ell.ref = Yp0.copy(), Ye0.copy()
    Y = np.concatenate([Yp0.ravel(), np.zeros(prob.par.n_mu), Ye0.ravel(), np.zeros(prob.ell.n_mu)])
    r, J = prob.evaluate(Y)
    nr = float(np.max(np.abs(r)))
    hist = [nr]
    it = 0
    while nr > tol:
        if it >= maxit:
            raise TrajectoryError(f"hybrid Newton: no convergence in {maxit} steps (residual {nr:.3e})")
        dY = _solve_linear(J, -r)
        if not np.all(np.isfinite(dY)):
            raise TrajectoryError("hybrid Newton: singular linearization")
        n2 = np.linalg.norm(r)
        t = 1.0
        while True:
            Yn = Y + t * dY
            rn, _ = prob.evaluate(Yn, jac=False)
            if np.linalg.norm(rn) < (1 - 1e-4 * t) * n2:
                break
            t *= 0.5
            if t < 1e-4:
                # stalled: report whether this is a least-squares floor
                g = np.linalg.norm(J.T @ r) / max(n2, 1e-300)
                raise TrajectoryError(f"hybrid Newton: line search failed (residual {nr:.3e}, "
                                      f"normalized gradient {g:.1e})")
        Y = Yn
        it += 1
        r, J = prob.evaluate(Y)
        nr = float(np.max(np.abs(r)))
        hist.append(nr)
    Yp, _ = prob.par.split(Y[:prob.cp])
    Ye, _ = prob.ell.split(Y[prob.cp:])
    Ap = np.array([prob.par._split_slice(z)[0] for z in Yp])
    Pp = np.array([prob.par._split_slice(z)[1] for z in Yp])
    par = ParabolicPath(grid, sp_, Ap, np.array([parabolicValue(grid, a, pert) for a in Ap]), Psi=Pp)
    ell = TemporalPath.from_vectors(grid, se, Ye, ends=(cmid, tgt), residual=nr)
    res, match = hybridResidual(par, ell, pert)
    return HybridTrajectory(par, ell, match, nr, "found",
                            {"iterations": it, "history": hist, "shape": J.shape, "flow_residual": res})


def _junction_fingerprint(h, pert):
    return fingerprint(h.elliptic.config(0), pert)


def thetaChainMatrix(catalog, degree, pert=None, S=12.0, M=32, n_starts=4, seed=0, const_tol=1e-10):
    """The comparison matrix ``Theta_k`` over Z2.

    Generators of Morse index ``degree`` are sorted by increasing action
    (ties broken by catalog id).  Entry ``[i, j]`` counts hybrid trajectories
    from generator j to generator i mod 2.  Diagonal entries come from the
    constant concatenation, entries whose target action is not below the
    source action are certified empty by the energy obstruction, and the
    rest are counted from ``n_starts`` Newton starts.

    Returns
    -------
    dict with ``matrix`` (int array), ``generators`` (id, action, index),
    per-entry ``certificates``, ``flags`` for inconclusive entries, and the
    checks ``unit_diagonal`` and ``upper_triangular``.
    """
    gens = [c for c in catalog if c.morse_index == degree]
    gens.sort(key=lambda c: (c.value, c.id))
    n = len(gens)
    Mx = np.zeros((n, n), dtype=int)
    cert = [[None] * n for _ in range(n)]
    flags = []
    rng = np.random.default_rng(seed)
    for j, src in enumerate(gens):
        for i, tgt in enumerate(gens):
            if i == j:
                h = solveHybrid(src, tgt, S, M, pert)
                ok = h.status == "constant" and h.residual <= const_tol and h.matching_residual <= const_tol
                Mx[i, j] = 1 if ok else 0
                cert[i][j] = {"kind": "constant", "residual": h.residual, "matching": h.matching_residual}
                if not ok:
                    flags.append((i, j, "constant concatenation failed"))
                continue
            h = solveHybrid(src, tgt, S, M, pert)
            if h.status == "empty":
                cert[i][j] = {"kind": "energy", **h.info}
                continue
            found = []
            for k in range(n_starts):
                try:
                    hk = solveHybrid(src, tgt, S, M, pert, init_t=rng.uniform(0.2, 0.8),
                                     jitter=0.01 * k, rng=rng)
                except TrajectoryError:
                    continue
                fp = _junction_fingerprint(hk, pert)
                if not any(same_fingerprint(fp, f) for f in found):
                    found.append(fp)
            Mx[i, j] = len(found) % 2
            cert[i][j] = {"kind": "count", "solutions": len(found), "starts": n_starts}
            if not found:
                flags.append((i, j, "no solution found; count inconclusive"))
    return {
        "degree": degree,
        "matrix": Mx,
        "generators": [{"id": c.id, "action": c.value, "index": c.morse_index} for c in gens],
        "certificates": cert,
        "flags": flags,
        "unit_diagonal": bool(np.all(np.diag(Mx) == 1)) if n else True,
        "upper_triangular": bool(np.all(np.tril(Mx, -1) == 0)),
    }
