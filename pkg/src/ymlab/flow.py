"""Connecting trajectories of the perturbed elliptic flow.

A trajectory is a path ``s -> y(s) = (A, omega, Psi)`` on ``[-S, S]`` with

    dy/ds + V(y) = 0,

where the first two components of ``V`` are
``grad(J + h) - (d_A Psi, -[Psi, omega])`` and the third is the gauge-fixing
term ``-d_{A_r}^*(A - A_r) + [omega_r, omega - omega_r]`` relative to a
reference path ``y_r``.  Its linearization at ``y_r = y`` is ``d/ds + B``.

Discretization, all in L2-orthonormal coordinates:

* box scheme on a uniform s-grid: on each interval
  ``(y[m+1] - y[m]) / ds + avg V = 0`` with the average of ``V`` over the
  straight segment taken by 3-point Gauss-Legendre,
* projection end conditions: at ``-S`` the component of ``y - y-`` along
  the positive eigenvectors of ``B(y-)`` vanishes, at ``+S`` the component
  of ``y - y+`` along the negative eigenvectors of ``B(y+)``,
* for u(1) the constant part of Psi is pinned to zero on every slice,
  with one multiplier per interval to keep the system consistent,
* a phase condition fixing the action at the middle slice, which removes
  the s-translation when the endpoint indices differ by one.
"""
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import lattice as lat
from . import functional as fn
from .functional import Configuration, GL3_NODES, GL3_WEIGHTS
from .critical import (CriticalPoint, assembleB, flow_jacobian, stationary_residual,
                       _pack, _unpack, _stabilizer_vector)

__all__ = [
    "TemporalPath",
    "SpaceTimeOperator",
    "TrajectoryError",
    "solveTrajectory",
    "initialPath",
    "assembleD",
    "assembleDAdjoint",
    "numericIndex",
    "indexReport",
    "decayFit",
    "coercivityEstimate",
    "constantPath",
    "abelianLinearFlow",
    "temporalGauge",
    "omegaSecondOrderResidual",
    "gaugeOrthogonality",
    "detectBreaking",
]


class TrajectoryError(RuntimeError):
    """Newton failure or a rank-deficient linearization."""


class DegenerateError(RuntimeError):
    """Smallest singular value below the degeneracy floor."""


@dataclass(eq=False)
class TemporalPath:
    """A sampled path ``(A(s), omega(s), Psi(s))``.

    ``ends`` holds the endpoint configurations the path is asymptotic to,
    ``endpoint_ids`` their catalog ids.
    """

    grid: lat.TorusGrid
    s: np.ndarray
    A: np.ndarray
    omega: np.ndarray
    Psi: np.ndarray
    ends: tuple = (None, None)
    endpoint_ids: tuple = (-1, -1)
    residual: float = np.nan
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s = np.asarray(self.s, float)
        M = len(self.s)
        if self.A.shape[0] != M or self.omega.shape[0] != M or self.Psi.shape[0] != M:
            raise ValueError("slice counts of A, omega, Psi and s differ")
        if self.A.shape[1:-1] != (2,) + self.grid.shape or self.omega.shape[1:-1] != self.grid.shape:
            raise ValueError("slice shapes do not match the grid")

    @property
    def M(self):
        return len(self.s)

    @property
    def ds(self):
        return float(self.s[1] - self.s[0])

    @property
    def dim(self):
        return self.A.shape[-1]

    def config(self, m):
        return Configuration(self.grid, self.A[m], self.omega[m])

    def replace(self, **kw):
        return dc_replace(self, **kw)

    def vectors(self):
        """Per-slice orthonormal coordinates, shape (M, N)."""
        return np.stack([_pack(self.grid, self.config(m), self.Psi[m]) for m in range(self.M)])

    @classmethod
    def from_vectors(cls, grid, s, Y, **kw):
        d = _dim_of(grid, Y.shape[1])
        A, W, P = zip(*(_unpack(grid, d, y) for y in Y))
        return cls(grid, s, np.array(A), np.array(W), np.array(P), **kw)


def _dim_of(grid, N):
    return N // (4 * grid.nsites)


def _as_cfg(x):
    return x.cfg if isinstance(x, CriticalPoint) else x


def constantPath(cfg, S, M):
    """The constant path at a configuration."""
    cfg = _as_cfg(cfg)
    s = np.linspace(-S, S, M)
    A = np.repeat(cfg.A[None], M, axis=0)
    W = np.repeat(cfg.omega[None], M, axis=0)
    return TemporalPath(cfg.grid, s, A, W, np.zeros_like(W), ends=(cfg, cfg), residual=0.0)


# -- discrete problem ------------------------------------------------------------
class _BoxScheme:
    """Residual and Jacobian of the discretized trajectory equations."""

    def __init__(self, grid, dim, s, pert, ends, ref, phase=None, quotient=None, eig_floor=1e-9):
        self.grid, self.d, self.s, self.pert = grid, dim, np.asarray(s, float), pert
        self.M = len(s)
        self.ds = np.diff(self.s)
        self.n1, self.n0 = grid.size(1, dim), grid.size(0, dim)
        self.N = self.n1 + 2 * self.n0
        self.ref = ref
        quotient = (dim == 1) if quotient is None else quotient
        self.quotient = quotient
        self.ends = ends
        self.yL = _pack(grid, ends[0], np.zeros_like(ends[0].omega))
        self.yR = _pack(grid, ends[1], np.zeros_like(ends[1].omega))
        self.PL, self.specL = self._projector(ends[0], positive=True, floor=eig_floor)
        self.PR, self.specR = self._projector(ends[1], positive=False, floor=eig_floor)
        self.phase = phase
        if quotient:
            q = np.zeros(self.N)
            q[self.n1 + self.n0:] = _stabilizer_vector(grid, dim)
            self.q = q
        self.n_mu = self.M - 1 if quotient else 0
        self.n_stab = self.M if quotient else 0
        self.cols = self.M * self.N + self.n_mu
        self.rows_core = (self.M - 1) * self.N + self.n_stab + self.PL.shape[1] + self.PR.shape[1]

    def _projector(self, cfg, positive, floor):
        B = assembleB(cfg, self.pert)
        w, V = B.eigh()
        if np.min(np.abs(w)) < floor:
            raise TrajectoryError(f"endpoint operator B is singular (min |eig| {np.min(np.abs(w)):.2e})")
        sel = w > 0 if positive else w < 0
        P = V[:, sel]
        if B.psi_quotient:
            P = B.reduction() @ P
        return P, w

    def banded_order(self, with_phase=True):
        """Row and column permutations into slice-by-slice banded form."""
        M, N = self.M, self.N
        nL, nR = self.PL.shape[1], self.PR.shape[1]
        r0 = (M - 1) * N
        rb = r0 + self.n_stab
        rows = [np.arange(rb, rb + nL)]
        for m in range(M - 1):
            rows.append(np.arange(m * N, (m + 1) * N))
            if self.quotient:
                rows.append([r0 + m])
        if self.quotient:
            rows.append([r0 + M - 1])
        rows.append(np.arange(rb + nL, rb + nL + nR))
        if with_phase and self.phase is not None:
            rows.append([rb + nL + nR])
        cols = []
        for m in range(M):
            cols.append(np.arange(m * N, (m + 1) * N))
            if self.quotient and m < M - 1:
                cols.append([M * N + m])
        return np.concatenate(rows).astype(int), np.concatenate(cols).astype(int)

    def split(self, Y):
        Ys = Y[:self.M * self.N].reshape(self.M, self.N)
        return Ys, Y[self.M * self.N:]

    def _node(self, z, zr, jac):
        A, w, P = _unpack(self.grid, self.d, z)
        cfg = Configuration(self.grid, A, w)
        Ar, wr, _ = _unpack(self.grid, self.d, zr)
        ref = Configuration(self.grid, Ar, wr)
        v = stationary_residual(cfg, P, self.pert, ref)
        J = flow_jacobian(cfg, P, self.pert, ref) if jac else None
        return v, J

    def evaluate(self, Y, jac=True, with_phase=True):
        M, N = self.M, self.N
        Ys, mu = self.split(Y)
        R = []
        rows, cols, vals = [], [], []
        I = sp.identity(N, format="csr")

        def put(block, r0, c0):
            c = block.tocoo()
            rows.append(c.row + r0)
            cols.append(c.col + c0)
            vals.append(c.data)

        for m in range(M - 1):
            h = self.ds[m]
            acc = np.zeros(N)
            J0 = -I / h
            J1 = I / h
            for t, wq in zip(GL3_NODES, GL3_WEIGHTS):
                z = (1 - t) * Ys[m] + t * Ys[m + 1]
                zr = (1 - t) * self.ref[m] + t * self.ref[m + 1]
                v, J = self._node(z, zr, jac)
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
        for P, y, yE, c0 in ((self.PL, Ys[0], self.yL, 0), (self.PR, Ys[-1], self.yR, (M - 1) * N)):
            R.append(P.T @ (y - yE))
            if jac:
                put(sp.csr_matrix(P.T), r0, c0)
            r0 += P.shape[1]
        if with_phase and self.phase is not None:
            mid, target = self.phase
            A, w, _ = _unpack(self.grid, self.d, Ys[mid])
            cfg = Configuration(self.grid, A, w)
            R.append(np.array([fn.action(cfg, self.pert) - target]))
            if jac:
                gA, gw = fn.gradient(cfg, self.pert)
                g = np.concatenate([self.grid.sqrt_weight(1, self.d) * gA.ravel(),
                                    self.grid.sqrt_weight(0, self.d) * gw.ravel(), np.zeros(self.n0)])
                nz = np.nonzero(g)[0]
                rows.append(np.full(len(nz), r0))
                cols.append(mid * N + nz)
                vals.append(g[nz])
            r0 += 1
        res = np.concatenate(R)
        if not jac:
            return res, None
        Jm = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(r0, self.cols))
        return res, Jm


def _solve_linear(J, rhs, order=None):
    """Square: sparse LU.  Rectangular: minimum-norm / least-squares via normal equations.

    ``order = (row_perm, col_perm)`` puts a square system in block-banded
    form, for which the natural column order keeps the LU fill small.
    """
    r, c = J.shape
    try:
        if r == c:
            if order is None:
                return spla.splu(J.tocsc()).solve(rhs)
            rp, cp = order
            lu = spla.splu(J[rp][:, cp].tocsc(), permc_spec="NATURAL")
            x = np.empty_like(rhs)
            x[cp] = lu.solve(rhs[rp])
            return x
        J = J.tocsc()
        if c > r:
            K = (J @ J.T).tocsc()
            return J.T @ spla.splu(K).solve(rhs)
        K = (J.T @ J).tocsc()
        return spla.splu(K).solve(J.T @ rhs)
    except RuntimeError as e:
        raise TrajectoryError(f"rank-deficient linearization ({e})") from None


def _endpoint_rate(spec, positive):
    w = spec[spec > 0] if positive else -spec[spec < 0]
    return float(np.min(w)) if len(w) else 1.0


def _initial_vectors(grid, s, yL, yR, rate):
    S0, S1 = s[0], s[-1]
    sig = 1.0 / (1.0 + np.exp(-rate * s))
    a, b = 1.0 / (1.0 + np.exp(-rate * S0)), 1.0 / (1.0 + np.exp(-rate * S1))
    t = (sig - a) / (b - a)
    return (1 - t)[:, None] * yL[None] + t[:, None] * yR[None]


def initialPath(endpoints, pert, S, M, rate=None, eig_floor=1e-9):
    """Logistic interpolation between two endpoints, ``Psi = 0``.

    ``rate`` defaults to the slowest decay rate of the endpoint operators.
    """
    c0, c1 = _as_cfg(endpoints[0]), _as_cfg(endpoints[1])
    grid = c0.grid
    s = np.linspace(-S, S, M)
    yL = _pack(grid, c0, np.zeros_like(c0.omega))
    yR = _pack(grid, c1, np.zeros_like(c1.omega))
    if rate is None:
        tmp = _BoxScheme(grid, c0.dim, s, pert, (c0, c1), np.zeros((M, len(yL))), None, eig_floor=eig_floor)
        rate = min(_endpoint_rate(tmp.specL, False), _endpoint_rate(tmp.specR, True))
    return TemporalPath.from_vectors(grid, s, _initial_vectors(grid, s, yL, yR, rate), ends=(c0, c1))


def solveTrajectory(endpoints, pert, S, M, init=None, tol=1e-9, maxit=40, phase=True,
                    index_gap=None, eig_floor=1e-9, verbose=False):
    """Solve for a connecting trajectory between two critical points.

    Parameters
    ----------
    endpoints : (CriticalPoint or Configuration, same)
        Start (``s = -S``) and end (``s = +S``) representatives.  The
        representatives fix the gauge class of the ends, so a different lift
        of the same critical point gives a different trajectory class.
    S, M : float, int
        Half-length of the s-interval and number of slices.
    init : TemporalPath, optional
        Initial guess; also used as the gauge reference.  By default a
        logistic interpolation with rate given by the slowest endpoint mode.
    tol : float
        Converged when the max-norm residual is at most ``tol * scale`` with
        ``scale = max(1, |y+ - y-|_inf)``.
    phase : bool
        Fix the action at the middle slice to the mean of the endpoint
        actions (needed when the index difference is one).

    Returns
    -------
    TemporalPath
        ``info`` holds the Newton history, the energy profile and breaking
        diagnostics.

    Raises
    ------
    TrajectoryError
        On Newton divergence or a rank-deficient linearization.
    """
    c0, c1 = _as_cfg(endpoints[0]), _as_cfg(endpoints[1])
    grid = c0.grid
    d = c0.dim
    s = np.linspace(-S, S, M)
    ids = tuple(getattr(e, "id", -1) for e in endpoints)
    if init is None and c0 is c1:
        out = constantPath(c0, S, M)
        out.endpoint_ids = ids
        out.info = {"iterations": 0, "history": [0.0], "converged": True}
        return out
    yL = _pack(grid, c0, np.zeros_like(c0.omega))
    yR = _pack(grid, c1, np.zeros_like(c1.omega))
    if init is None:
        Y0 = initialPath((c0, c1), pert, S, M, eig_floor=eig_floor).vectors()
    else:
        if len(init.s) != M:
            raise ValueError("initial path has the wrong number of slices")
        Y0 = init.vectors()
        s = init.s
    ph = None
    if phase:
        target = 0.5 * (fn.action(c0, pert) + fn.action(c1, pert))
        ph = (M // 2, target)
    prob = _BoxScheme(grid, d, s, pert, (c0, c1), Y0.copy(), ph, eig_floor=eig_floor)
    scale = max(1.0, float(np.max(np.abs(yR - yL))))
    Y = np.concatenate([Y0.ravel(), np.zeros(prob.n_mu)])
    r, J = prob.evaluate(Y)
    nr = float(np.max(np.abs(r)))
    hist = [nr]
    it = 0
    order = prob.banded_order() if J.shape[0] == J.shape[1] else None
    while nr > tol * scale:
        if it >= maxit:
            raise TrajectoryError(f"no convergence in {maxit} Newton steps (residual {nr:.3e})")
        dY = _solve_linear(J, -r, order)
        if not np.all(np.isfinite(dY)):
            raise TrajectoryError("rank-deficient linearization (non-finite Newton step)")
        n2 = np.linalg.norm(r)
        t = 1.0
        while True:
            Yn = Y + t * dY
            rn, _ = prob.evaluate(Yn, jac=False)
            if np.linalg.norm(rn) < (1 - 1e-4 * t) * n2:
                break
            t *= 0.5
            if t < 1e-4:
                raise TrajectoryError(f"line search failed at Newton step {it} (residual {nr:.3e})")
        Y = Yn
        it += 1
        r, J = prob.evaluate(Y)
        nr = float(np.max(np.abs(r)))
        hist.append(nr)
        if verbose:
            print(f"newton {it}: residual {nr:.3e} step {t:g}")
    Ys, mu = prob.split(Y)
    path = TemporalPath.from_vectors(grid, s, Ys, ends=(c0, c1), endpoint_ids=ids, residual=nr)
    prof = energyProfile(path, pert)
    path.info = {
        "iterations": it,
        "history": hist,
        "converged": True,
        "shape": J.shape,
        "multiplier_max": float(np.max(np.abs(mu))) if len(mu) else 0.0,
        "energy_profile": prof,
        "breaking": detectBreaking(prof),
    }
    return path


def energyProfile(path, pert=None):
    """Per-interval energy ``|avg grad|^2``, the integrand of the energy identity."""
    prof = np.zeros(path.M - 1)
    for m in range(path.M - 1):
        gA, gw = fn.segment_gradient(path.config(m), path.config(m + 1), pert)
        prof[m] = path.grid.inner(gA, gA, 1) + path.grid.inner(gw, gw, 0)
    return prof


def detectBreaking(profile, rel=1e-3):
    """Flag an energy profile with two bumps separated by a near-zero plateau."""
    p = np.asarray(profile, float)
    if len(p) < 3 or p.max() <= 0:
        return {"broken": False, "peaks": []}
    top = p.max()
    peaks = [i for i in range(1, len(p) - 1) if p[i] >= p[i - 1] and p[i] >= p[i + 1] and p[i] > 0.05 * top]
    broken = False
    for a, b in zip(peaks[:-1], peaks[1:]):
        if p[a:b + 1].min() < rel * min(p[a], p[b]):
            broken = True
    return {"broken": broken, "peaks": peaks}


# -- linearized operator ------------------------------------------------------------
@dataclass(eq=False)
class SpaceTimeOperator:
    """Sparse discretization of ``d/ds + B`` on the truncated cylinder.

    Columns are ``M`` slices of ``N`` unknowns followed by ``n_mu`` u(1)
    multipliers; rows are ``M - 1`` interval blocks, ``n_stab`` stabilizer
    rows and the left and right projection end conditions.
    """

    matrix: sp.spmatrix
    M: int
    N: int
    n_mu: int
    n_stab: int
    n_left: int
    n_right: int
    ds: float
    row_order: np.ndarray = None

    @property
    def shape(self):
        return self.matrix.shape

    def interior(self):
        """The interval-block rows acting on the slice columns."""
        r = (self.M - 1) * self.N
        return self.matrix[:r, :self.M * self.N]


def _scheme_for(path, pert):
    ends = path.ends
    if ends[0] is None:
        ends = (path.config(0), path.config(path.M - 1))
    Y = path.vectors()
    return _BoxScheme(path.grid, path.dim, path.s, pert, ends, Y), Y


def assembleD(path, pert=None):
    """Linearization of the discrete trajectory equations at a path.

    The gauge reference is the path itself, so the interval blocks are
    ``+-1/ds`` plus Gauss-Legendre averages of ``B`` with its Psi terms.
    """
    prob, Y = _scheme_for(path, pert)
    mu = np.zeros(prob.n_mu)
    _, J = prob.evaluate(np.concatenate([Y.ravel(), mu]), with_phase=False)
    return SpaceTimeOperator(J.tocsr(), prob.M, prob.N, prob.n_mu, prob.n_stab,
                             prob.PL.shape[1], prob.PR.shape[1], float(prob.ds[0]),
                             prob.banded_order(with_phase=False)[0])


def assembleDAdjoint(path, pert=None):
    """Formal adjoint ``-d/ds + B^T`` of the interior blocks, built slice by slice.

    Row block ``m`` (slice) collects ``-1/ds + avg (1 - t) B^T`` from
    interval ``m`` and ``1/ds + avg t B^T`` from interval ``m - 1``.
    """
    prob, Y = _scheme_for(path, pert)
    M, N = prob.M, prob.N
    I = sp.identity(N, format="csr")
    blocks = [[None] * (M - 1) for _ in range(M)]
    for m in range(M - 1):
        h = prob.ds[m]
        L = -I / h
        U = I / h
        for t, wq in zip(GL3_NODES, GL3_WEIGHTS):
            z = (1 - t) * Y[m] + t * Y[m + 1]
            _, J = prob._node(z, z, True)
            L = L + (wq * (1 - t)) * J.T
            U = U + (wq * t) * J.T
        blocks[m][m] = L
        blocks[m + 1][m] = U
    return sp.bmat(blocks, format="csr")


def indexReport(op, threshold=1e-8, dense_max=4000, n_eigs=6, seed=0):
    """Kernel and cokernel of a space-time operator.

    Singular values below ``threshold * |op|`` count as zero.  Dense SVD for
    small operators.  For large ones with at least as many columns as rows,
    the smallest singular values come from shift-invert eigenvalues of
    ``D D^T`` (cokernel); the kernel then has dimension
    ``cols - rows + dim coker`` and is sampled by projecting random vectors.
    """
    D = op.matrix if isinstance(op, SpaceTimeOperator) else sp.csr_matrix(op)
    r, c = D.shape
    out = {"rows": r, "cols": c}
    if max(r, c) <= dense_max or c < r:
        U, sv, Vt = np.linalg.svd(D.toarray())
        nrm = sv[0]
        thr = threshold * nrm
        rank = int(np.sum(sv > thr))
        kern = Vt[rank:].T
        coker = U[:, rank:]
        out["method"] = "dense-svd"
        out["sigma_min_nonzero"] = float(sv[rank - 1]) if rank else 0.0
        near = sv[(sv > thr / 100) & (sv < thr * 100)]
    else:
        nrm = float(spla.svds(D, k=1, return_singular_vectors=False)[0])
        thr = threshold * nrm
        K = (D @ D.T).tocsr()
        shift = 1e-3 * thr**2
        rp = getattr(op, "row_order", None)
        rp = np.arange(r) if rp is None else rp
        lu = spla.splu((K[rp][:, rp] + shift * sp.identity(r)).tocsc(), permc_spec="NATURAL")

        def inv(x):
            y = np.empty_like(x)
            y[rp] = lu.solve(np.ascontiguousarray(x[rp]))
            return y

        OP = spla.LinearOperator((r, r), matvec=inv, dtype=float)
        w, V = spla.eigsh(K, k=n_eigs, sigma=-shift, which="LM", OPinv=OP)
        sv = np.sqrt(np.clip(w, 0, None))
        zero = sv <= thr
        coker = V[:, zero]
        nz = np.sort(sv[~zero])
        rng = np.random.default_rng(seed)
        k = c - r + int(np.sum(zero))
        Z = rng.standard_normal((c, k))
        # project onto ker D (exact when D has full row rank up to the cokernel)
        Z = Z - D.T @ np.column_stack([inv(z) for z in (D @ Z).T])
        kern = np.linalg.qr(Z)[0] if k else np.zeros((c, 0))
        out["method"] = "normal-eigsh"
        out["sigma_min_nonzero"] = float(nz[0]) if len(nz) else np.nan
        out["kernel_residual"] = float(np.linalg.norm(D @ kern)) if k else 0.0
        near = nz[(nz > thr / 100) & (nz < thr * 100)]
    out.update({
        "norm": float(nrm),
        "threshold": float(thr),
        "kernel_dim": int(kern.shape[1]),
        "cokernel_dim": int(coker.shape[1]),
        "index": int(kern.shape[1] - coker.shape[1]),
        "cols_minus_rows": int(c - r),
        "ambiguous": bool(len(near) > 0),
        "kernel": kern,
        "cokernel": coker,
    })
    return out


def numericIndex(op, threshold=1e-8, dense_max=4000):
    """``dim ker - dim coker`` of a space-time operator."""
    return indexReport(op, threshold, dense_max)["index"]


# -- diagnostics ----------------------------------------------------------------
def _orbit_basis(cfg):
    """Orthonormal basis of the tangent space to the gauge orbit, ON coordinates."""
    grid, d = cfg.grid, cfg.dim
    G = lat.orthonormal(grid, lat.covD0_matrix(grid, cfg.A), 1, 0, d)
    K = sp.vstack([G, lat.ad_field(cfg.omega)]).toarray()
    U, sv, _ = np.linalg.svd(K, full_matrices=False)
    return U[:, sv > 1e-10 * max(sv[0], 1.0)]


def _horizontal(Q, x):
    return x - Q @ (Q.T @ x)


def _slice_distance(path, ref, m, Q=None):
    """``|(A, omega)(s_m) - ref|`` with the gauge-orbit directions at ``ref`` removed."""
    g, d = path.grid, path.dim
    x = np.concatenate([g.sqrt_weight(1, d) * (path.A[m] - ref.A).ravel(),
                        g.sqrt_weight(0, d) * (path.omega[m] - ref.omega).ravel()])
    if Q is not None:
        x = _horizontal(Q, x)
    return float(np.linalg.norm(x))


def decayFit(path, tail=1 / 3, floor=1e-13, slack=0.9):
    """Exponential decay of a trajectory towards its ends.

    On each tail (first and last ``tail`` fraction of the s-range) fits
    ``log |(A, omega)(s) - end|`` linearly in s, with the distance taken
    modulo the gauge orbit of the end (its tangent directions projected
    out; exact for u(1)).  Also evaluates ``f = 1/2 |xi|^2`` for the
    velocity ``xi = d/ds (A, omega)`` with the same projection, i.e. in the
    gauge where the path moves orthogonally to the orbits, and checks
    ``f'' >= (slack delta)^2 f`` with central differences.

    Returns
    -------
    dict with ``delta`` and ``r2`` (the worse of both tails) and per-tail
    entries ``minus`` and ``plus``.  ``degenerate`` is set when the path is
    constant up to ``floor``.
    """
    M = path.M
    n = int(np.floor(tail * M))
    if n < 4:
        raise ValueError("tail too short: increase S or M")
    ends = path.ends if path.ends[0] is not None else (path.config(0), path.config(M - 1))
    Y = path.vectors()
    nAw = path.grid.size(1, path.dim) + path.grid.size(0, path.dim)
    xi = np.gradient(Y[:, :nAw], path.s, axis=0)
    out = {}
    for side, idx, end in (("minus", np.arange(0, n), ends[0]), ("plus", np.arange(M - n, M), ends[1])):
        end = _as_cfg(end)
        Q = _orbit_basis(end)
        dist = np.array([_slice_distance(path, end, m, Q) for m in idx])
        xh = np.array([_horizontal(Q, xi[m]) for m in range(M)])
        f = 0.5 * np.sum(xh**2, axis=1)
        fpp = np.gradient(np.gradient(f, path.s), path.s)
        ok = dist > floor
        if np.sum(ok) < 3:
            out[side] = {"delta": np.nan, "r2": 0.0, "degenerate": True}
            continue
        x, y = path.s[idx][ok], np.log(dist[ok])
        coef = np.polyfit(x, y, 1)
        fit = np.polyval(coef, x)
        ss = np.sum((y - y.mean()) ** 2)
        r2 = 1 - np.sum((y - fit) ** 2) / ss if ss > 0 else 0.0
        delta = coef[0] if side == "minus" else -coef[0]
        inner = idx[2:-2]
        dd = (slack * delta) ** 2
        margin = fpp[inner] - dd * f[inner]
        out[side] = {
            "delta": float(delta),
            "r2": float(r2),
            "degenerate": False,
            "fpp_min_margin": float(np.min(margin)),
            "fpp_min_ratio": float(np.min(fpp[inner] / np.maximum(f[inner], 1e-300))),
            "fpp_ok": bool(np.all(margin >= -1e-12 * np.max(np.abs(fpp[inner])))),
        }
    sides = [out[k] for k in ("minus", "plus")]
    live = [v for v in sides if not v["degenerate"]]
    out["degenerate"] = not live
    out["delta"] = float(min(v["delta"] for v in live)) if live else np.nan
    out["r2"] = float(min(v["r2"] for v in live)) if live else 0.0
    return out


def endpointGaps(path, pert=None):
    """Slowest decay rates allowed by the endpoint operators.

    At ``-S`` the smallest ``|lambda|`` over negative eigenvalues of ``B(y-)``,
    at ``+S`` the smallest positive eigenvalue of ``B(y+)``.
    """
    wL = assembleB(_as_cfg(path.ends[0]), pert).eigh()[0]
    wR = assembleB(_as_cfg(path.ends[1]), pert).eigh()[0]
    return {"minus": float(np.min(-wL[wL < 0])), "plus": float(np.min(wR[wR > 0]))}


def coercivityEstimate(cfg, pert=None, grad_threshold=None, check=True, floor=1e-10):
    """Smallest singular value of the stacked linearized operator.

    The three rows ``*d_A v + d_A psi - *[omega ^ alpha] + dX``,
    ``*d_A alpha - v - [omega ^ psi] + dY`` and ``d_A^* alpha - *[omega ^ *v]``
    equal ``diag(-1, 1, -1) B``.  For u(1) the constant psi direction is
    removed.  ``c = 1 / sigma_min^2`` bounds ``|xi|^2`` by the squared
    residual norms.
    """
    cfg = _as_cfg(cfg)
    B = assembleB(cfg, pert)
    n1, n0 = B.layout[0][1], B.layout[1][1]
    sign = np.concatenate([-np.ones(n1), np.ones(n0), -np.ones(n0)])
    T = sign[:, None] * B.matrix.toarray()
    Q = B.reduction()
    if Q is not None:
        T = T @ Q
    sv = np.linalg.svd(T, compute_uv=False)
    smin = float(sv[-1])
    gA, gw = fn.gradient(cfg, pert)
    ginf = float(max(np.max(np.abs(gA)), np.max(np.abs(gw))))
    out = {
        "sigma_min": smin,
        "c": 1.0 / smin**2 if smin > 0 else np.inf,
        "grad_inf": ginf,
        "within_threshold": None if grad_threshold is None else bool(ginf <= grad_threshold),
        "degenerate": smin < floor,
    }
    if check and smin < floor:
        raise DegenerateError(f"sigma_min = {smin:.3e} below {floor:g}: degenerate critical point nearby")
    return out


# -- unperturbed abelian flow and invariants ------------------------------------------
def abelianLinearFlow(cfg0, s):
    """Exact unperturbed u(1) flow in temporal gauge from an initial slice.

    The u(1) flow with ``Psi = 0`` is linear, ``dy/ds = -L y`` with ``L``
    symmetric in orthonormal coordinates, so ``y(s) = exp(-s L) y(0)``.
    The slice ``cfg0`` is placed at ``s = 0``.  Only sensible for smooth
    data or short intervals: ``L`` is indefinite.
    """
    grid = cfg0.grid
    if cfg0.dim != 1:
        raise ValueError("abelian flow needs a u(1) configuration")
    B = assembleB(cfg0, None)
    n1, n0 = B.layout[0][1], B.layout[1][1]
    L = B.matrix[: n1 + n0, : n1 + n0].toarray()
    w, V = np.linalg.eigh(L)
    y0 = _pack(grid, cfg0, np.zeros_like(cfg0.omega))[: n1 + n0]
    c = V.T @ y0
    s = np.asarray(s, float)
    Y = (V @ (np.exp(-np.outer(w, s)) * c[:, None])).T
    Y = np.concatenate([Y, np.zeros((len(s), n0))], axis=1)
    return TemporalPath.from_vectors(grid, s, Y)


def temporalGauge(path):
    """Gauge transform a path to ``Psi = 0`` up to O(ds) (first slice fixed)."""
    g = path.grid
    alg = path.config(0).algebra
    gf = [np.broadcast_to(np.eye(alg.n, dtype=complex), g.shape + (alg.n, alg.n)).copy()]
    for m in range(path.M - 1):
        Pm = 0.5 * (path.Psi[m] + path.Psi[m + 1])
        gf.append(alg.expmap(-(path.s[m + 1] - path.s[m]) * Pm) @ gf[-1])
    return fn.gaugeActPath(np.array(gf), path)


def omegaSecondOrderResidual(path):
    """``|omega'' - omega' - d_A^* d_A omega|`` at interior slices (temporal gauge).

    Central differences in s; the largest slice L2 norm is returned together
    with the per-slice values.
    """
    g = path.grid
    s = path.s
    out = []
    for m in range(1, path.M - 1):
        h0, h1 = s[m] - s[m - 1], s[m + 1] - s[m]
        w0, w1, w2 = path.omega[m - 1], path.omega[m], path.omega[m + 1]
        dd = 2 * (h0 * w2 - (h0 + h1) * w1 + h1 * w0) / (h0 * h1 * (h0 + h1))
        d1 = (w2 - w0) / (h0 + h1)
        A = path.A[m]
        lap = lat.coD1(g, A, lat.covD0(g, A, w1))
        r = dd - d1 - lap
        out.append(g.norm(r, 0))
    out = np.array(out)
    return float(out.max()), out


def gaugeOrthogonality(path, phis):
    """``<d/ds A, d_A phi>``-type products along a path.

    For each interval and each 0-form ``phi`` computes
    ``<dA/ds - d_A Psi, d_A phi> + <domega/ds + [Psi, omega], [omega, phi]>``
    at the midpoint, relative to the product of norms.  Returns the maximum.
    """
    g = path.grid
    worst = 0.0
    for m in range(path.M - 1):
        h = path.s[m + 1] - path.s[m]
        A = 0.5 * (path.A[m] + path.A[m + 1])
        w = 0.5 * (path.omega[m] + path.omega[m + 1])
        P = 0.5 * (path.Psi[m] + path.Psi[m + 1])
        alg = path.config(m).algebra
        kA = (path.A[m + 1] - path.A[m]) / h - lat.covD0(g, A, P)
        kw = (path.omega[m + 1] - path.omega[m]) / h + alg.bracket(P, w)
        nk = np.sqrt(g.inner(kA, kA, 1) + g.inner(kw, kw, 0))
        for phi in phis:
            gA = lat.covD0(g, A, phi)
            gw = alg.bracket(w, phi)
            ng = np.sqrt(g.inner(gA, gA, 1) + g.inner(gw, gw, 0))
            if nk == 0 or ng == 0:
                continue
            val = (g.inner(kA, gA, 1) + g.inner(kw, gw, 0)) / (nk * ng)
            worst = max(worst, abs(val))
    return worst
