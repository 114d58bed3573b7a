"""Critical points, Hessian-type operators and spectral flow.

Operators act on triples ``(alpha, v, psi)`` of a 1-form and two 0-forms and
are assembled in L2-orthonormal coordinates, so that L2-symmetric operators
are symmetric matrices.  In this basis, with ``G = d_A`` on 0-forms,
``S = * d_A`` on 1-forms and ``ad = [omega, .]``, the operator B of the
linearized flow is

    [[ M_omega + Hh_AA,  S^T + Hh_Aw,  -G  ],
     [ S + Hh_wA,        -1 + Hh_ww,   -ad ],
     [ -G^T,             ad,            0  ]]

where ``<M_omega a, b> = <[a1, b2] - [a2, b1], omega>`` and ``Hh`` is the
Hessian of the perturbation (``-dX_f`` and ``dY_f``).

For u(1) the constant 0-forms are a stabilizer; psi is restricted to
mean-zero 0-forms (orthogonal to constants) wherever a nondegenerate
operator is needed.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import lattice as lat
from . import functional as fn
from .functional import Configuration, holonomy, Loop

__all__ = [
    "OperatorAssembly",
    "CriticalPoint",
    "operatorBlocks",
    "assembleB",
    "assembleC",
    "hessianSpectrum",
    "findCritical",
    "classifyCritical",
    "checkEigenReduction",
    "hellmannFeynman",
    "spectralFlow",
    "fingerprint",
    "SpectralFlowError",
]


class SpectralFlowError(RuntimeError):
    """A crossing with singular crossing operator."""


# -- block operators ----------------------------------------------------------
def operatorBlocks(cfg, pert=None, include_Y=True):
    """Sparse orthonormal-coordinate blocks at a configuration."""
    grid = cfg.grid
    d = cfg.dim
    r0 = grid.sqrt_weight(0, d)
    r1 = grid.sqrt_weight(1, d)
    G = lat.orthonormal(grid, lat.covD0_matrix(grid, cfg.A), 1, 0, d)
    # S = hodge_2 o d_A, from 1-forms to 0-forms
    S_raw = sp.diags(np.repeat(np.exp(-2 * grid.u).ravel(), d)) @ lat.covD1_matrix(grid, cfg.A)
    S = (sp.diags(r0) @ S_raw @ sp.diags(1 / r1)).tocsr()
    ad = lat.ad_field(cfg.omega)
    Mw = sp.bmat([[None, -ad], [ad, None]], format="csr")
    n1 = grid.size(1, d)
    Hh = fn.perturbationHessian(cfg, pert)
    rr = np.concatenate([r1, r0])
    Hh = (sp.diags(1 / rr) @ Hh @ sp.diags(1 / rr)).tocsr()
    HAA = Hh[:n1, :n1]
    if include_Y:
        HAw, HwA, Hww = Hh[:n1, n1:], Hh[n1:, :n1], Hh[n1:, n1:]
    else:
        HAw = HwA = Hww = None
    return {"G": G, "S": S, "ad": ad, "M": Mw, "HAA": HAA, "HAw": HAw, "HwA": HwA, "Hww": Hww,
            "n1": n1, "n0": grid.size(0, d)}


def _stabilizer_vector(grid, dim):
    """Unit orthonormal-coordinate vector of the constant u(1) gauge stabilizer."""
    q = grid.sqrt_weight(0, dim)
    return q / np.linalg.norm(q)


def _complement_basis(q):
    """Orthonormal basis of the complement of a unit vector (Householder)."""
    n = len(q)
    e = np.zeros(n)
    e[-1] = 1.0
    u = q - e
    nu = np.linalg.norm(u)
    H = np.eye(n)
    if nu > 1e-14:
        u = u / nu
        H -= 2 * np.outer(u, u)
    return H[:, :-1]


@dataclass(eq=False)
class OperatorAssembly:
    """An assembled operator with its coordinate layout.

    ``matrix`` acts in orthonormal coordinates on the concatenation of the
    blocks listed in ``layout`` (name, size).  ``psi_quotient`` is set for u(1),
    where the reduced form drops the constant psi direction.
    """

    matrix: sp.spmatrix
    kind: str
    layout: list
    psi_quotient: bool = False
    psi_offset: int = 0
    psi_size: int = 0
    _basis: np.ndarray = field(default=None, repr=False)
    stab: np.ndarray = field(default=None, repr=False)

    @property
    def size(self):
        return self.matrix.shape[0]

    def symmetry_error(self):
        D = self.matrix - self.matrix.T
        return float(abs(D).max()) if D.nnz else 0.0

    def reduction(self):
        """Dense isometry from reduced coordinates into the full space."""
        if self._basis is None:
            n = self.size
            if not self.psi_quotient:
                self._basis = None
                return None
            Q = _complement_basis(self.stab)
            top = self.psi_offset
            k = self.psi_size
            B = np.zeros((n, n - 1))
            B[:top, :top] = np.eye(top)
            B[top:top + k, top:top + k - 1] = Q
            rest = n - top - k
            if rest:
                B[top + k:, top + k - 1:] = np.eye(rest)
            self._basis = B
        return self._basis

    def dense(self, reduced=True):
        M = self.matrix.toarray()
        if reduced and self.psi_quotient:
            Q = self.reduction()
            return Q.T @ M @ Q
        return M

    def lift(self, y):
        if not self.psi_quotient:
            return y
        return self.reduction() @ y

    def reduce(self, x):
        if not self.psi_quotient:
            return x
        return self.reduction().T @ x

    def split(self, x):
        """Split a full-space vector into named blocks."""
        out, k = {}, 0
        for name, n in self.layout:
            out[name] = x[k:k + n]
            k += n
        return out

    def eigh(self, reduced=True):
        w, V = np.linalg.eigh(self.dense(reduced))
        return w, V


def assembleB(cfg, pert=None, Psi=None, include_Y=True, quotient=None):
    """Operator B of the linearized flow on ``(alpha, v, psi)``.

    ``include_Y=False`` gives ``B_{f,0}``: the perturbation enters only
    through its A-Hessian (``-dX_f`` in the alpha row), as when ``Y_f = 0``.
    ``Psi`` adds the ``[Psi, .]`` terms on the alpha and v rows.
    """
    b = operatorBlocks(cfg, pert, include_Y)
    G, S, ad, n1, n0 = b["G"], b["S"], b["ad"], b["n1"], b["n0"]
    I0 = sp.identity(n0, format="csr")
    A11 = b["M"] + b["HAA"]
    A12 = S.T if b["HAw"] is None else S.T + b["HAw"]
    A21 = S if b["HwA"] is None else S + b["HwA"]
    A22 = -I0 if b["Hww"] is None else -I0 + b["Hww"]
    if Psi is not None:
        aP = lat.ad_field(Psi)
        A11 = A11 + sp.block_diag([aP, aP])
        A22 = A22 + aP
    M = sp.bmat([[A11, A12, -G], [A21, A22, -ad], [-G.T, ad, None]], format="csr")
    quotient = cfg.algebra.abelian if quotient is None else quotient
    return OperatorAssembly(
        M, "B" if include_Y else "B_f0", [("alpha", n1), ("v", n0), ("psi", n0)],
        psi_quotient=quotient, psi_offset=n1 + n0, psi_size=n0,
        stab=_stabilizer_vector(cfg.grid, cfg.dim) if quotient else None,
    )


def assembleC(cfg, pert=None, lam=0.0, quotient=None):
    """Reduced operator ``C_{f,lambda}`` on ``(alpha, psi)``.

    Obtained from ``B_{f,0} - lambda`` by eliminating
    ``v = (S alpha - [omega, psi]) / (lambda + 1)``.
    """
    if abs(lam + 1) < 1e-14:
        raise ValueError("C_{f,lambda} is undefined at lambda = -1")
    b = operatorBlocks(cfg, pert, include_Y=False)
    G, S, ad, n1, n0 = b["G"], b["S"], b["ad"], b["n1"], b["n0"]
    k = 1.0 / (lam + 1.0)
    C11 = k * (S.T @ S) + b["M"] + b["HAA"]
    C12 = -G - k * (S.T @ ad)
    C21 = -G.T + k * (ad @ S)
    C22 = -k * (ad @ ad)
    M = sp.bmat([[C11, C12], [C21, C22]], format="csr")
    quotient = cfg.algebra.abelian if quotient is None else quotient
    return OperatorAssembly(
        M, f"C({lam:g})", [("alpha", n1), ("psi", n0)],
        psi_quotient=quotient, psi_offset=n1, psi_size=n0,
        stab=_stabilizer_vector(cfg.grid, cfg.dim) if quotient else None,
    )


# -- Hessian and index ----------------------------------------------------------
def slice_basis(grid, A):
    """Orthonormal basis of the Coulomb slice ``ker d_A^*`` on 1-forms."""
    d = A.shape[-1]
    G = lat.orthonormal(grid, lat.covD0_matrix(grid, A), 1, 0, d).toarray()
    return sla.null_space(G.T, rcond=1e-10)


def hessian_matrix(grid, A, pert=None):
    """Dense orthonormal-coordinate Hessian of ``YM + h`` in A.

    ``S^T S + M_{*F} + Hh_AA``, the true second derivative; at a critical
    point it is the upper-left block of ``C_{f,0}`` with ``omega = *F_A``.
    """
    d = A.shape[-1]
    w = lat.hodge(grid, lat.curvature(grid, A), 2)
    cfg = Configuration(grid, A, w)
    b = operatorBlocks(cfg, pert, include_Y=False)
    H = b["S"].T @ b["S"] + b["M"] + b["HAA"]
    return H.toarray()


def hessianSpectrum(grid, A, pert=None, tol=1e-8):
    """Morse index of ``YM + h`` at A on the Coulomb slice.

    Returns
    -------
    index : int
        Number of eigenvalues below ``-tol``.
    eigenvalues : ndarray
        Sorted eigenvalues on the slice.
    kernel : int
        Number of eigenvalues with ``|lambda| <= tol``.
    """
    H = hessian_matrix(grid, A, pert)
    Q = slice_basis(grid, A)
    w = np.linalg.eigvalsh(Q.T @ H @ Q)
    return int(np.sum(w < -tol)), w, int(np.sum(np.abs(w) <= tol))


# -- critical points -----------------------------------------------------------
def fingerprint(cfg, pert=None):
    """Gauge-invariant fingerprint: action and cycle holonomy spectra.

    The holonomy eigenvalues along the x- and y-cycles through site (0, 0)
    are recorded as sorted phase angles.
    """
    grid = cfg.grid
    out = {"action": float(fn.action(cfg, pert))}
    for name, loop in (("x", Loop.x_cycle(grid, 0)), ("y", Loop.y_cycle(grid, 0))):
        ev = np.linalg.eigvals(holonomy(cfg, loop))
        out[name] = sorted(float(a) for a in np.angle(ev))
    return out


def same_fingerprint(f1, f2, tol_action=1e-6, tol_hol=1e-5):
    if abs(f1["action"] - f2["action"]) > tol_action:
        return False
    for k in ("x", "y"):
        a = np.exp(1j * np.array(f1[k]))
        b = np.exp(1j * np.array(f2[k]))
        # multisets of unit complex numbers, compared after sorting by angle
        if len(a) != len(b) or np.max(np.abs(np.sort_complex(a) - np.sort_complex(b))) > tol_hol:
            if not _multiset_close(a, b, tol_hol):
                return False
    return True


def _multiset_close(a, b, tol):
    b = list(b)
    for z in a:
        j = int(np.argmin([abs(z - w) for w in b]))
        if abs(z - b[j]) > tol:
            return False
        b.pop(j)
    return True


@dataclass(eq=False)
class CriticalPoint:
    """A perturbed critical point with its Morse data."""

    cfg: Configuration
    value: float
    residual: float
    morse_index: int
    spectrum: np.ndarray
    flags: dict
    hessian_eigs: np.ndarray = None
    fingerprint: dict = None
    id: int = -1

    def to_dict(self):
        return {
            "id": self.id,
            "value": self.value,
            "residual": self.residual,
            "morse_index": self.morse_index,
            "spectrum_head": [float(x) for x in self.spectrum],
            "flags": self.flags,
            "fingerprint": self.fingerprint,
        }


class NewtonError(RuntimeError):
    pass


def stationary_residual(cfg, Psi, pert, ref):
    """Residual of ``grad - (d_A Psi, -[Psi, omega])`` plus the slice condition.

    Returned in orthonormal coordinates, concatenated as ``(alpha, v, psi)``.
    """
    grid = cfg.grid
    d = cfg.dim
    g = cfg.algebra
    gA, gw = fn.gradient(cfg, pert)
    rA = gA - lat.covD0(grid, cfg.A, Psi)
    rw = gw + g.bracket(Psi, cfg.omega)
    rP = -lat.coD1(grid, ref.A, cfg.A - ref.A) + g.bracket(ref.omega, cfg.omega - ref.omega)
    return np.concatenate([
        grid.sqrt_weight(1, d) * rA.ravel(),
        grid.sqrt_weight(0, d) * rw.ravel(),
        grid.sqrt_weight(0, d) * rP.ravel(),
    ])


def flow_jacobian(cfg, Psi, pert, ref):
    """Sparse Jacobian of :func:`stationary_residual` (orthonormal coordinates).

    Equal to B with ``[Psi, .]`` terms, except that the gauge row is taken
    at the reference configuration.
    """
    if cfg.algebra.abelian:
        return _abelian_flow_jacobian(cfg, pert)
    b = operatorBlocks(cfg, pert, include_Y=True)
    G, S, ad, n1, n0 = b["G"], b["S"], b["ad"], b["n1"], b["n0"]
    I0 = sp.identity(n0, format="csr")
    A11 = b["M"] + b["HAA"]
    A22 = -I0 + b["Hww"]
    if Psi is not None and np.any(Psi):
        aP = lat.ad_field(Psi)
        A11 = A11 + sp.block_diag([aP, aP])
        A22 = A22 + aP
    grid = cfg.grid
    d = cfg.dim
    if ref is cfg:
        Gr, adr = G, ad
    else:
        Gr = lat.orthonormal(grid, lat.covD0_matrix(grid, ref.A), 1, 0, d)
        adr = lat.ad_field(ref.omega)
    return sp.bmat([[A11, S.T + b["HAw"], -G], [S + b["HwA"], A22, -ad], [-Gr.T, adr, None]],
                   format="csr")


def _abelian_flow_jacobian(cfg, pert):
    # for u(1) all brackets vanish: a constant operator plus the perturbation Hessian
    grid = cfg.grid
    key = ("flow_jacobian_u1",)
    if key not in grid._cache:
        zero = Configuration.zero(grid, "u1")
        grid._cache[key] = assembleB(zero, None).matrix.tocsr()
    base = grid._cache[key]
    if pert is None or not pert.active:
        return base
    n1, n0 = grid.size(1, 1), grid.size(0, 1)
    rr = np.concatenate([grid.sqrt_weight(1, 1), grid.sqrt_weight(0, 1)])
    H = sp.diags(1 / rr) @ fn.perturbationHessian(cfg, pert) @ sp.diags(1 / rr)
    H = sp.block_diag([H, sp.csr_matrix((n0, n0))], format="csr")
    return (base + H).tocsr()


def _unpack(grid, d, z):
    n1, n0 = grid.size(1, d), grid.size(0, d)
    r1, r0 = grid.sqrt_weight(1, d), grid.sqrt_weight(0, d)
    A = (z[:n1] / r1).reshape(2, grid.Nx, grid.Ny, d)
    w = (z[n1:n1 + n0] / r0).reshape(grid.Nx, grid.Ny, d)
    P = (z[n1 + n0:] / r0).reshape(grid.Nx, grid.Ny, d)
    return A, w, P


def _pack(grid, cfg, Psi):
    d = cfg.dim
    return np.concatenate([
        grid.sqrt_weight(1, d) * cfg.A.ravel(),
        grid.sqrt_weight(0, d) * cfg.omega.ravel(),
        grid.sqrt_weight(0, d) * Psi.ravel(),
    ])


def newton_stationary(pert, init, tol=1e-10, maxit=60, ref=None):
    """Damped Newton iteration for a critical point on the Coulomb slice.

    Unknowns are ``(A, omega, Psi)`` with Psi a multiplier for the slice
    condition; at a solution Psi vanishes because the gradient is
    orthogonal to gauge orbits.  Linear solves use least squares, which
    handles the u(1) stabilizer and reducible points.
    """
    grid = init.grid
    d = init.dim
    ref = init if ref is None else ref
    z = _pack(grid, init, np.zeros_like(init.omega))

    def res(z):
        A, w, P = _unpack(grid, d, z)
        return stationary_residual(Configuration(grid, A, w), P, pert, ref)

    r = res(z)
    nr = np.linalg.norm(r)
    history = [nr]
    for it in range(maxit):
        if nr <= tol:
            break
        A, w, P = _unpack(grid, d, z)
        J = flow_jacobian(Configuration(grid, A, w), P, pert, ref).toarray()
        dz = np.linalg.lstsq(J, -r, rcond=1e-12)[0]
        t = 1.0
        while t > 1e-4:
            zn = z + t * dz
            rn = res(zn)
            if np.linalg.norm(rn) < (1 - 1e-4 * t) * nr:
                break
            t *= 0.5
        else:
            raise NewtonError(f"line search failed at iteration {it}, residual {nr:.3e}")
        z, r = zn, rn
        nr = np.linalg.norm(r)
        history.append(nr)
    if nr > tol:
        raise NewtonError(f"no convergence in {maxit} iterations, residual {nr:.3e}")
    A, w, _ = _unpack(grid, d, z)
    return Configuration(grid, A, w), history


def findCritical(pert, init, tol=1e-10, maxit=60, spectrum_head=8, eig_tol=1e-8):
    """Solve the perturbed critical-point equations from an initial guess.

    Solves ``*d_A omega + X_f = 0``, ``*F_A - omega + Y_f = 0`` with the
    Coulomb condition relative to the initial configuration, then computes
    the Morse index on the slice and the head of the spectrum of B.

    Raises
    ------
    NewtonError
        If the iteration does not reach ``tol``.
    """
    cfg, hist = newton_stationary(pert, init, tol, maxit)
    return describe_critical(cfg, pert, spectrum_head, eig_tol, iterations=len(hist) - 1)


def describe_critical(cfg, pert, spectrum_head=8, eig_tol=1e-8, iterations=0):
    grid = cfg.grid
    resid = fn.gradient_norm(cfg, pert)
    index, heig, hker = hessianSpectrum(grid, cfg.A, pert, eig_tol)
    B = assembleB(cfg, pert)
    w = np.linalg.eigvalsh(B.dense())
    head = np.sort(w[np.argsort(np.abs(w))[:spectrum_head]])
    cp = CriticalPoint(cfg, float(fn.action(cfg, pert)), float(resid), index, head, {},
                       hessian_eigs=heig, fingerprint=fingerprint(cfg, pert))
    cp.flags = classifyCritical(cp, pert, eig_tol)
    cp.flags["newton_iterations"] = iterations
    return cp


def classifyCritical(cp, pert=None, tol=1e-8):
    """Irreducibility and nondegeneracy flags.

    Irreducible: the stacked infinitesimal action ``phi -> (d_A phi, [omega, phi])``
    has trivial kernel (smallest singular value at least ``tol``).  For u(1)
    the constants always lie in this kernel; ``irreducible_mod_constants``
    repeats the test on mean-zero 0-forms.  Nondegenerate: the Hessian on
    the Coulomb slice has no kernel.
    """
    cfg = cp.cfg if isinstance(cp, CriticalPoint) else cp
    grid = cfg.grid
    d = cfg.dim
    G = lat.orthonormal(grid, lat.covD0_matrix(grid, cfg.A), 1, 0, d)
    K = sp.vstack([G, lat.ad_field(cfg.omega)]).toarray()
    sv = np.linalg.svd(K, compute_uv=False)
    smin = float(sv[-1])
    flags = {"sigma_min_action": smin, "irreducible": smin >= tol}
    if cfg.algebra.abelian:
        Q = _complement_basis(_stabilizer_vector(grid, d))
        sq = float(np.linalg.svd(K @ Q, compute_uv=False)[-1])
        flags["irreducible_mod_constants"] = sq >= tol
        flags["sigma_min_action_mod_constants"] = sq
    heig = cp.hessian_eigs if isinstance(cp, CriticalPoint) else hessianSpectrum(grid, cfg.A, pert, tol)[1]
    hmin = float(np.min(np.abs(heig)))
    flags["hessian_min_abs"] = hmin
    flags["nondegenerate"] = hmin > tol
    flags["ambiguous"] = bool(tol / 10 <= hmin <= 10 * tol or tol / 10 <= smin <= 10 * tol)
    return flags


# -- eigenvalue reduction -----------------------------------------------------------
def checkEigenReduction(cfg, pert=None, lam_gap=1e-3, tol=1e-8, n_pairs=None, kernel_tol=1e-9):
    """Check the correspondence between eigenpairs of ``B_{f,0}`` and ``C_{f,lambda}``.

    Forward: every eigenpair ``(lambda, (alpha, v, psi))`` of ``B_{f,0}`` with
    ``|lambda + 1| > lam_gap`` solves ``C_lambda (alpha, psi) = lambda (alpha, psi)``
    and ``v = (S alpha - [omega, psi]) / (lambda + 1)``.  Backward: the null
    space of ``C_lambda - lambda``, computed from C alone, lifts to eigenvectors
    of B with the same multiplicity.
    """
    B = assembleB(cfg, pert, include_Y=False)
    w, V = B.eigh()
    blocks = operatorBlocks(cfg, pert, include_Y=False)
    S, ad = blocks["S"], blocks["ad"]
    n1, n0 = blocks["n1"], blocks["n0"]
    order = np.argsort(np.abs(w))
    if n_pairs is not None:
        order = order[:n_pairs]
    fwd, vrec, back, mult_ok = [], [], [], []
    cache = {}
    for k in order:
        lam = w[k]
        if abs(lam + 1) <= lam_gap:
            continue
        x = B.lift(V[:, k])
        a, v, p = x[:n1], x[n1:n1 + n0], x[n1 + n0:]
        C = assembleC(cfg, pert, lam)
        y = np.concatenate([a, p])
        r = C.matrix @ y - lam * y
        ny = np.linalg.norm(y)
        if ny < 1e-12:
            continue  # pure-v eigenvector (lambda = -1 branch)
        fwd.append(np.linalg.norm(r) / ny)
        vr = (S @ a - ad @ p) / (lam + 1)
        vrec.append(np.linalg.norm(vr - v) / max(np.linalg.norm(x), 1e-300))
        key = round(float(lam), 9)
        if key in cache:
            continue
        cache[key] = True
        mult = int(np.sum(np.abs(w - lam) <= 1e-9 * max(1, abs(lam))))
        Cd = C.dense() - lam * np.eye(C.dense().shape[0])
        U, sv, Wt = np.linalg.svd(Cd)
        scale = max(1.0, sv[0])
        null = Wt[sv <= 1e-8 * scale]
        mult_ok.append(len(null) == mult)
        for yr in null:
            yf = C.lift(yr)
            a2, p2 = yf[:n1], yf[n1:]
            v2 = (S @ a2 - ad @ p2) / (lam + 1)
            xi = np.concatenate([a2, v2, p2])
            rb = B.matrix @ xi - lam * xi
            back.append(np.linalg.norm(rb) / np.linalg.norm(xi))
    kB = int(np.sum(np.abs(w) <= kernel_tol))
    C0 = assembleC(cfg, pert, 0.0)
    kC = int(np.sum(np.abs(np.linalg.eigvalsh(C0.dense())) <= kernel_tol))
    fwd = np.array(fwd)
    back = np.array(back)
    return {
        "n_checked": int(len(fwd)),
        "max_forward_residual": float(fwd.max()) if len(fwd) else 0.0,
        "max_v_reconstruction": float(np.max(vrec)) if vrec else 0.0,
        "max_backward_residual": float(back.max()) if len(back) else 0.0,
        "multiplicities_agree": bool(all(mult_ok)),
        "kernel_B": kB,
        "kernel_C": kC,
        "passed": bool((len(fwd) == 0 or fwd.max() <= tol) and (len(back) == 0 or back.max() <= tol)
                       and all(mult_ok) and kB == kC),
    }


# -- eigenvalue derivatives ----------------------------------------------------------
def hellmannFeynman(family, s0, branches, ds=1e-4, gap_min=1e-6):
    """Compare finite-difference eigenvalue slopes with ``<F'(s) x, x>``.

    Parameters
    ----------
    family : callable
        ``s -> dense symmetric matrix``.
    s0 : float
    branches : sequence of int
        Positions in the sorted spectrum at ``s0``.

    Returns
    -------
    list of dict, one per branch, with ``slope_fd``, ``slope_hf``, ``rel_err``
    and the local gap.
    """
    F0 = family(s0)
    Fp, Fm = family(s0 + ds), family(s0 - ds)
    w0, V0 = np.linalg.eigh(F0)
    wp = np.linalg.eigvalsh(Fp)
    wm = np.linalg.eigvalsh(Fm)
    dF = (Fp - Fm) / (2 * ds)
    out = []
    for k in branches:
        gap = min(abs(w0[k] - w0[k - 1]) if k > 0 else np.inf,
                  abs(w0[k + 1] - w0[k]) if k + 1 < len(w0) else np.inf)
        if gap < gap_min:
            raise ValueError(f"branch {k} is not simple at s0 (gap {gap:.2e})")
        x = V0[:, k]
        fd = (wp[k] - wm[k]) / (2 * ds)
        hf = float(x @ dF @ x)
        out.append({"branch": int(k), "lambda": float(w0[k]), "slope_fd": float(fd),
                    "slope_hf": hf, "rel_err": abs(fd - hf) / max(abs(fd), 1e-300), "gap": float(gap)})
    return out


# -- spectral flow ----------------------------------------------------------------
class PiecewiseLinearPath:
    """Piecewise-linear interpolation of configurations on an s-grid."""

    def __init__(self, s, cfgs):
        self.s = np.asarray(s, float)
        self.cfgs = list(cfgs)

    def segment(self, s):
        k = int(np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self.s) - 2))
        return k

    def __call__(self, s, k=None):
        k = self.segment(s) if k is None else k
        t = (s - self.s[k]) / (self.s[k + 1] - self.s[k])
        c0, c1 = self.cfgs[k], self.cfgs[k + 1]
        return Configuration(c0.grid, (1 - t) * c0.A + t * c1.A, (1 - t) * c0.omega + t * c1.omega)


def _count_neg(M, tol=0.0):
    return int(np.sum(np.linalg.eigvalsh(M) < -tol))


def spectralFlow(path, pert, s=None, operator="B_f0", crossing_tol=1e-9, grazing_tol=1e-7,
                 refine=1, check_C=True):
    """Spectral flow of ``B_{f,0}(s)`` along a path of configurations.

    Parameters
    ----------
    path : PiecewiseLinearPath or callable
        ``s -> Configuration``; a list of configurations with ``s`` is also
        accepted.
    operator : {"B_f0", "C_f"}
        The operator family whose crossings are counted.

    Returns
    -------
    flow : int
        ``-sum sign Gamma``, the index contribution as stated for
        ``d/ds + B``.
    crossings : list of dict
        Per crossing: position, signature, the eigenvalue slope, and for
        ``B_f0`` the matching C_f data and positivity factor.
    """
    if not callable(path):
        path = PiecewiseLinearPath(s, path)
    if isinstance(path, PiecewiseLinearPath):
        knots = path.s
    else:
        knots = np.asarray(s, float)
    grid_s = np.concatenate([np.linspace(a, b, refine + 1)[:-1] for a, b in zip(knots[:-1], knots[1:])]
                            + [knots[-1:]])

    def op(sv, k=None):
        c = path(sv, k) if isinstance(path, PiecewiseLinearPath) else path(sv)
        if operator == "C_f":
            return assembleC(c, pert, 0.0).dense()
        return assembleB(c, pert, include_Y=False).dense()

    def seg(sv):
        return path.segment(sv) if isinstance(path, PiecewiseLinearPath) else None

    counts, mins = [], []
    for sv in grid_s:
        w = np.linalg.eigvalsh(op(sv))
        counts.append(int(np.sum(w < 0)))
        mins.append(float(np.min(np.abs(w))))
    crossings, grazing = [], []
    for i in range(len(grid_s) - 1):
        a, b = grid_s[i], grid_s[i + 1]
        if counts[i] == counts[i + 1]:
            if max(mins[i], mins[i + 1]) < grazing_tol:
                grazing.append(float(a))
            continue
        k = seg(0.5 * (a + b))
        na = counts[i]
        # bisection on the negative count
        while b - a > crossing_tol:
            m = 0.5 * (a + b)
            if _count_neg(op(m, k)) == na:
                a = m
            else:
                b = m
        sc = 0.5 * (a + b)
        crossings.append(_crossing_data(op, sc, k, counts[i + 1] - counts[i], pert, path, operator, check_C))
    sig = sum(c["signature"] for c in crossings)
    return -sig, crossings


def _crossing_data(op, sc, k, jump, pert, path, operator, check_C):
    M = op(sc, k)
    w, V = np.linalg.eigh(M)
    nk = max(abs(jump), 1)
    idx = np.argsort(np.abs(w))[:nk]
    P = V[:, idx]
    h = 1e-6
    dM = (op(sc + h, k) - op(sc - h, k)) / (2 * h)
    Gam = P.T @ dM @ P
    ge = np.linalg.eigvalsh(Gam)
    if np.min(np.abs(ge)) < 1e-10 * max(1.0, np.abs(dM).max()):
        raise SpectralFlowError(f"singular crossing operator at s = {sc:.6g}")
    sign = int(np.sum(ge > 0) - np.sum(ge < 0))
    out = {"s": float(sc), "signature": sign, "jump": int(jump), "gamma": ge.tolist(),
           "kernel_dim": int(nk)}
    if operator == "B_f0" and check_C and nk == 1:
        c = path(sc, k) if isinstance(path, PiecewiseLinearPath) else path(sc)
        B = assembleB(c, pert, include_Y=False)
        x = B.lift(P[:, 0])
        b = operatorBlocks(c, pert, include_Y=False)
        n1, n0 = b["n1"], b["n0"]
        a, p = x[:n1], x[n1 + n0:]
        y = np.concatenate([a, p])
        ny2 = y @ y
        t = b["S"] @ a - b["ad"] @ p
        factor = 1.0 + (t @ t) / ny2
        # crossing of C_f at the same point
        def cop(sv):
            cc = path(sv, k) if isinstance(path, PiecewiseLinearPath) else path(sv)
            return assembleC(cc, pert, 0.0).dense()
        Cm = cop(sc)
        wc, Vc = np.linalg.eigh(Cm)
        j = int(np.argmin(np.abs(wc)))
        dC = (cop(sc + h) - cop(sc - h)) / (2 * h)
        mu_dot = float(Vc[:, j] @ dC @ Vc[:, j])
        lam_dot = float(ge[0])
        out.update({
            "positivity_factor": float(factor),
            "C_eigenvalue": float(wc[j]),
            "C_signature": int(np.sign(mu_dot)),
            "mu_dot": mu_dot,
            "lambda_dot": lam_dot,
            "slope_ratio": mu_dot / lam_dot,
        })
    return out
