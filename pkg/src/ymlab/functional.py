"""The elliptic Yang-Mills functional, holonomy perturbations and energies.

A configuration is a pair ``(A, omega)`` of a connection 1-form and an
ad-valued 0-form on a :class:`~ymlab.lattice.TorusGrid`.  The functional is

    J(A, omega) = <F_A, *omega> - 1/2 |omega|^2,

perturbed by a finite sum of Wilson-loop terms ``h = eps sum_i c_i f_i(rho_i)``.
Gradients are L2 gradients for the lattice weights, so the raw-coordinate
gradient of a function ``E`` satisfies ``dE[xi] = <grad E, xi>_{L2}``.
"""
from dataclasses import dataclass, field
import hashlib
import json

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid

from . import lattice as lat
from .lie import algebra, algebra_of, quat_exp, quat_mul

__all__ = [
    "Configuration",
    "Loop",
    "PerturbationSpec",
    "evalJ",
    "evalYM",
    "action",
    "holonomy",
    "holonomyPerturbation",
    "perturbationHessian",
    "gradient",
    "gaugeAct",
    "gaugeActPath",
    "energyDensity",
    "trajectoryEnergy",
    "trajectoryBounds",
]


@dataclass(eq=False)
class Configuration:
    """A pair ``(A, omega)`` on a grid."""

    grid: lat.TorusGrid
    A: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.A = self.grid.check(np.asarray(self.A, dtype=float), 1)
        self.omega = self.grid.check(np.asarray(self.omega, dtype=float), 0)
        if self.A.shape[-1] != self.omega.shape[-1]:
            raise ValueError("A and omega take values in different algebras")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.omega))):
            raise ValueError("configuration has non-finite entries")

    @property
    def dim(self):
        return self.A.shape[-1]

    @property
    def algebra(self):
        return algebra_of(self.A)

    @property
    def group(self):
        return self.algebra.name

    @classmethod
    def zero(cls, grid, group="u1"):
        d = algebra(group).dim
        return cls(grid, grid.zeros(1, d), grid.zeros(0, d))

    @classmethod
    def random(cls, grid, group="u1", rng=None, scale=1.0):
        rng = np.random.default_rng(rng)
        d = algebra(group).dim
        return cls(grid, grid.random(1, d, rng, scale), grid.random(0, d, rng, scale))

    def copy(self):
        return Configuration(self.grid, self.A.copy(), self.omega.copy())

    def vector(self):
        """Raw coordinates ``[A, omega]`` as one flat vector."""
        return np.concatenate([self.A.ravel(), self.omega.ravel()])

    @classmethod
    def from_vector(cls, grid, x, dim):
        n1 = grid.size(1, dim)
        return cls(grid, x[:n1].reshape(2, grid.Nx, grid.Ny, dim),
                   x[n1:].reshape(grid.Nx, grid.Ny, dim))

    def __add__(self, other):
        return Configuration(self.grid, self.A + other.A, self.omega + other.omega)

    def __sub__(self, other):
        return Configuration(self.grid, self.A - other.A, self.omega - other.omega)

    def scaled(self, t):
        return Configuration(self.grid, t * self.A, t * self.omega)


# -- perturbations ------------------------------------------------------------
_PROFILES = ("re-trace", "re-trace-squared")


@dataclass
class Loop:
    """A closed lattice path with an optional winding in the t-direction.

    Parameters
    ----------
    sites : list of (i, j)
        Consecutive nearest-neighbour sites; first and last coincide.  The
        first site is the basepoint.
    winding : int
        Power of ``exp(omega(basepoint))`` multiplied in front, which makes
        the holonomy depend on ``omega`` as for ``A + omega dt``.
    """

    sites: list
    winding: int = 0

    def __post_init__(self):
        self.sites = [tuple(int(v) for v in s) for s in self.sites]
        if len(self.sites) < 2 or self.sites[0] != self.sites[-1]:
            raise ValueError("loop must close: first and last site must coincide")

    @property
    def base(self):
        return self.sites[0]

    def edges(self, grid):
        """Edge list ``(axis, i, j, sign)`` in traversal order."""
        out = []
        for (i0, j0), (i1, j1) in zip(self.sites[:-1], self.sites[1:]):
            di = (i1 - i0) % grid.Nx
            dj = (j1 - j0) % grid.Ny
            if di == 1 and dj == 0:
                out.append((0, i0 % grid.Nx, j0 % grid.Ny, 1))
            elif di == grid.Nx - 1 and dj == 0:
                out.append((0, i1 % grid.Nx, j1 % grid.Ny, -1))
            elif dj == 1 and di == 0:
                out.append((1, i0 % grid.Nx, j0 % grid.Ny, 1))
            elif dj == grid.Ny - 1 and di == 0:
                out.append((1, i1 % grid.Nx, j1 % grid.Ny, -1))
            else:
                raise ValueError(f"sites {(i0, j0)} and {(i1, j1)} are not neighbours")
        return out

    @classmethod
    def x_cycle(cls, grid, row=0, start=0, winding=0):
        """The straight loop around the x-direction at fixed ``j = row``."""
        return cls([((start + k) % grid.Nx, row) for k in range(grid.Nx + 1)], winding)

    @classmethod
    def y_cycle(cls, grid, col=0, start=0, winding=0):
        return cls([(col, (start + k) % grid.Ny) for k in range(grid.Ny + 1)], winding)

    @classmethod
    def rectangle(cls, i, j, a=1, b=1, winding=0):
        """Counter-clockwise ``a x b`` rectangle with lower-left corner ``(i, j)``."""
        s = [(i + k, j) for k in range(a)]
        s += [(i + a, j + k) for k in range(b)]
        s += [(i + a - k, j + b) for k in range(a)]
        s += [(i, j + b - k) for k in range(b + 1)]
        return cls(s, winding)

    def to_dict(self):
        return {"sites": [list(s) for s in self.sites], "winding": self.winding}


@dataclass
class PerturbationSpec:
    """``h = eps * sum_i weights[i] * profile_i(rho_i)``."""

    loops: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    profiles: list = field(default_factory=list)
    eps: float = 0.0

    def __post_init__(self):
        n = len(self.loops)
        if not self.profiles:
            self.profiles = ["re-trace"] * n
        if len(self.weights) != n or len(self.profiles) != n:
            raise ValueError("loops, weights and profiles must have equal length")
        for p in self.profiles:
            if p not in _PROFILES:
                raise ValueError(f"unknown profile {p!r}; expected one of {_PROFILES}")

    @property
    def active(self):
        return self.eps != 0 and len(self.loops) > 0

    @property
    def omega_dependent(self):
        return self.active and any(l.winding != 0 for l in self.loops)

    def constant(self, dim):
        """``C_f = |eps| sum |c_i| max|profile_i|``, a bound on ``|h|``."""
        n = 2.0 if dim == 3 else 1.0
        m = {"re-trace": n, "re-trace-squared": n * n}
        return abs(self.eps) * sum(abs(c) * m[p] for c, p in zip(self.weights, self.profiles))

    def scaled(self, eps):
        return PerturbationSpec(self.loops, list(self.weights), list(self.profiles), eps)

    def to_dict(self):
        return {
            "eps": self.eps,
            "loops": [l.to_dict() for l in self.loops],
            "weights": list(self.weights),
            "profiles": list(self.profiles),
        }

    @classmethod
    def from_dict(cls, d):
        loops = [Loop(l["sites"], int(l.get("winding", 0))) for l in d.get("loops", [])]
        return cls(loops, [float(c) for c in d.get("weights", [])],
                   list(d.get("profiles", [])), float(d.get("eps", 0.0)))

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def cos_cos(cls, grid, eps, row=0, col=0):
        """``h = -eps (cos Theta_1 + cos Theta_2)`` on one x- and one y-cycle."""
        return cls([Loop.x_cycle(grid, row), Loop.y_cycle(grid, col)], [-1.0, -1.0],
                   ["re-trace", "re-trace"], eps)


NO_PERTURBATION = PerturbationSpec()


def _edge_arrays(grid, loop):
    e = loop.edges(grid)
    ax = np.array([t[0] for t in e])
    ii = np.array([t[1] for t in e])
    jj = np.array([t[2] for t in e])
    sg = np.array([t[3] for t in e], dtype=float)
    hs = np.where(ax == 0, grid.hx, grid.hy)
    return ax, ii, jj, sg * hs


def holonomy(cfg, loop):
    """Ordered product ``exp(w omega(p)) prod_k exp(+-h A_edge)``."""
    g = cfg.algebra
    ax, ii, jj, sh = _edge_arrays(cfg.grid, loop)
    p = loop.base
    rho = g.expmap(loop.winding * cfg.omega[p])
    for U in g.expmap(sh[:, None] * cfg.A[ax, ii, jj]):
        rho = rho @ U
    return rho


def _profile(name, t, order):
    """Profile value and derivatives as a function of the trace ``t``."""
    if name == "re-trace":
        return (t, 1.0, 0.0)[order]
    return (t * t, 2 * t, 2.0)[order]


def _loop_su2(g, edge_vals, sh, omega_p, w, name):
    """Value and gradient of ``profile(tr rho)`` for one loop.

    Works with real quaternions, so complex coefficients give the analytic
    continuation needed for complex-step Hessians.
    """
    xs = np.concatenate([(w * omega_p)[None], sh[:, None] * edge_vals])
    U = quat_exp(xs)
    m = len(xs)
    one = np.zeros(4, dtype=U.dtype)
    one[0] = 1.0
    pre = [one]
    for k in range(m):
        pre.append(quat_mul(pre[-1], U[k]))
    suf = [one]
    for k in range(m - 1, -1, -1):
        suf.append(quat_mul(U[k], suf[-1]))
    suf = suf[::-1]  # suf[k] = U_k ... U_{m-1}
    tr = 2 * pre[m][0]
    fp = _profile(name, tr, 1)
    # d tr rho / d x_k = dexp(x_k)^T pi(Q_k P_{k+1}); pi_a(q) = tr(q e_a) = -2 q_a
    Mq = np.stack([quat_mul(suf[k + 1], pre[k + 1]) for k in range(m)])
    pis = -2 * Mq[:, 1:]
    J = g.dexp(xs)
    gx = np.einsum("kba,kb->ka", J, pis) * fp
    gomega = w * gx[0]
    gedge = sh[:, None] * gx[1:]
    return _profile(name, tr, 0), gedge, gomega


def _loop_terms(cfg, loop, name):
    """Per-loop (value, edge gradient, basepoint omega gradient)."""
    g = cfg.algebra
    grid = cfg.grid
    ax, ii, jj, sh = _edge_arrays(grid, loop)
    p = loop.base
    w = loop.winding
    if g.abelian:
        theta = w * cfg.omega[p][0] + np.sum(sh * cfg.A[ax, ii, jj, 0])
        c = np.cos(theta)
        if name == "re-trace":
            f, df = c, -np.sin(theta)
        else:
            f, df = c * c, -np.sin(2 * theta)
        return f, (df * sh)[:, None], np.array([w * df])
    f, ge, go = _loop_su2(g, cfg.A[ax, ii, jj], sh, cfg.omega[p], w, name)
    return float(np.real(f)), np.real(ge), np.real(go)


def holonomyPerturbation(cfg, pert):
    """Perturbation value and its L2 gradients.

    Returns
    -------
    h : float
    X : 1-form, the Riesz representer of ``-dh/dA``
    Y : 0-form, the Riesz representer of ``+dh/domega``
    """
    grid = cfg.grid
    dA = np.zeros_like(cfg.A)
    dw = np.zeros_like(cfg.omega)
    h = 0.0
    if pert is not None and pert.active:
        for loop, c, name in zip(pert.loops, pert.weights, pert.profiles):
            ax, ii, jj, _ = _edge_arrays(grid, loop)
            f, ge, go = _loop_terms(cfg, loop, name)
            s = pert.eps * c
            h += s * f
            np.add.at(dA, (ax, ii, jj), s * ge)
            dw[loop.base] += s * go
    X = -dA / grid.weight(1, cfg.dim)
    Y = dw / grid.weight(0, cfg.dim)
    return h, X, Y


def _loop_index(grid, loop, dim):
    """Raw vector indices of the loop variables (basepoint omega first)."""
    ax, ii, jj, _ = _edge_arrays(grid, loop)
    n1 = grid.size(1, dim)
    a = np.arange(dim)
    e = ((ax * grid.Nx + ii) * grid.Ny + jj)[:, None] * dim + a
    p = loop.base
    o = n1 + (p[0] * grid.Ny + p[1]) * dim + a
    return np.concatenate([o, e.ravel()])


def perturbationHessian(cfg, pert):
    """Sparse raw-coordinate Hessian of h in the variables ``[A, omega]``.

    u(1) uses the closed form ``f''(Theta) grad Theta grad Theta^T``; su(2)
    uses complex-step differentiation of the analytic loop gradient.
    """
    grid = cfg.grid
    d = cfg.dim
    n = grid.size(1, d) + grid.size(0, d)
    rows, cols, vals = [], [], []
    if pert is not None and pert.active:
        g = cfg.algebra
        for loop, c, name in zip(pert.loops, pert.weights, pert.profiles):
            ax, ii, jj, sh = _edge_arrays(grid, loop)
            idx = _loop_index(grid, loop, d)
            w = loop.winding
            s = pert.eps * c
            if g.abelian:
                theta = w * cfg.omega[loop.base][0] + np.sum(sh * cfg.A[ax, ii, jj, 0])
                f2 = -np.cos(theta) if name == "re-trace" else -2 * np.cos(2 * theta)
                v = np.concatenate([[w], sh])
                Hl = s * f2 * np.outer(v, v)
            else:
                ev = cfg.A[ax, ii, jj]
                op = cfg.omega[loop.base]
                z0 = np.concatenate([op, ev.ravel()])
                nz = len(z0)
                Hl = np.empty((nz, nz))
                t = 1e-30
                for k in range(nz):
                    z = z0.astype(complex)
                    z[k] += 1j * t
                    _, ge, go = _loop_su2(g, z[d:].reshape(-1, d), sh, z[:d], w, name)
                    Hl[:, k] = np.concatenate([go, ge.ravel()]).imag / t
                Hl = s * 0.5 * (Hl + Hl.T)
            r, q = np.meshgrid(idx, idx, indexing="ij")
            rows.append(r.ravel())
            cols.append(q.ravel())
            vals.append(Hl.ravel())
    if rows:
        rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


# -- functionals ----------------------------------------------------------------
def evalYM(grid, A):
    """Yang-Mills energy ``1/2 |F_A|^2``."""
    F = lat.curvature(grid, A)
    return 0.5 * grid.inner(F, F, 2)


def evalJ(cfg):
    """``<F_A, *omega> - 1/2 |omega|^2``."""
    grid = cfg.grid
    F = lat.curvature(grid, cfg.A)
    return grid.inner(F, lat.hodge(grid, cfg.omega, 0), 2) - 0.5 * grid.inner(cfg.omega, cfg.omega, 0)


def action(cfg, pert=None):
    """Perturbed action ``J + h``."""
    h = holonomyPerturbation(cfg, pert)[0] if pert is not None and pert.active else 0.0
    return evalJ(cfg) + h


def gradient(cfg, pert=None):
    """L2 gradient of ``J + h``: ``(-*d_A omega - X, *F_A - omega + Y)``.

    The discrete ``-*d_A omega`` is ``d_A^*(*omega)``, the exact transpose of
    the curvature linearization.
    """
    grid = cfg.grid
    _, X, Y = holonomyPerturbation(cfg, pert)
    gA = lat.coD2(grid, cfg.A, lat.hodge(grid, cfg.omega, 0)) - X
    gw = lat.hodge(grid, lat.curvature(grid, cfg.A), 2) - cfg.omega + Y
    return gA, gw


def gradient_norm(cfg, pert=None):
    gA, gw = gradient(cfg, pert)
    return np.sqrt(cfg.grid.inner(gA, gA, 1) + cfg.grid.inner(gw, gw, 0))


# -- gauge action -------------------------------------------------------------
def _group_log(g, U):
    """Principal logarithm of group elements, as algebra coefficients."""
    if g.abelian:
        return np.angle(U[..., 0, 0])[..., None]
    c = np.clip(np.real(np.trace(U, axis1=-2, axis2=-1)) / 2, -1.0, 1.0)
    r = np.arccos(c)
    s = np.sin(r)
    fac = np.where(s < 1e-12, 1.0, r / np.where(s < 1e-12, 1.0, s))
    return np.real(g.from_matrix(U)) * fac[..., None]


def link_transform(grid, g, A, gf):
    """``A' = log(g(n)^-1 exp(h A) g(n+e)) / h`` per edge."""
    out = np.empty_like(A)
    for ax, h in ((0, grid.hx), (1, grid.hy)):
        U = g.expmap(h * A[ax])
        gn = gf
        ge = np.roll(gf, -1, axis=ax)
        V = np.conj(np.swapaxes(gn, -1, -2)) @ U @ ge
        out[ax] = _group_log(g, V) / h
    return out


def gaugeAct(gf, cfg):
    """Lattice gauge action of a site field of group elements on ``(A, omega)``."""
    grid = cfg.grid
    g = cfg.algebra
    gf = np.asarray(gf)
    if gf.shape[:2] != grid.shape:
        raise ValueError("gauge field does not match grid")
    A = link_transform(grid, g, cfg.A, gf)
    w = g.adjoint(gf, cfg.omega)
    return Configuration(grid, A, w)


def gaugeActPath(gfs, path):
    """Time-dependent gauge action on a path ``(A, omega, Psi)``.

    ``Psi' = g^-1 Psi g + log(g(s)^-1 g(s + ds)) / ds`` with a forward
    difference in s (backward at the last slice).
    """
    g = algebra_of(path.A)
    grid = path.grid
    M = len(path.s)
    ds = np.diff(path.s)
    A = np.empty_like(path.A)
    W = np.empty_like(path.omega)
    P = np.empty_like(path.Psi)
    for m in range(M):
        A[m] = link_transform(grid, g, path.A[m], gfs[m])
        W[m] = g.adjoint(gfs[m], path.omega[m])
        if m < M - 1:
            V = np.conj(np.swapaxes(gfs[m], -1, -2)) @ gfs[m + 1]
            dg = _group_log(g, V) / ds[m]
        else:
            V = np.conj(np.swapaxes(gfs[m - 1], -1, -2)) @ gfs[m]
            dg = _group_log(g, V) / ds[m - 1]
        P[m] = g.adjoint(gfs[m], path.Psi[m]) + dg
    return path.replace(A=A, omega=W, Psi=P)


# -- energy --------------------------------------------------------------------
def _pointwise_sq(grid, f, degree):
    """Pointwise metric norm squared, a real function per site."""
    s = np.sum(np.asarray(f) ** 2, axis=-1)
    if degree == 1:
        return np.exp(-2 * grid.u) * (s[0] + s[1])
    if degree == 2:
        return np.exp(-4 * grid.u) * s
    return s


def energyDensity(cfg, pert=None, Psi=None, dA=None, domega=None):
    """Gauge-invariant energy density, a real function per site.

    Without s-derivatives this is ``1/2 (|grad_A|^2 + |grad_omega|^2)``.
    With derivatives it is the kinetic form
    ``1/2 (|dA/ds - d_A Psi|^2 + |domega/ds + [Psi, omega]|^2)``; on solutions
    the two agree.  Integrating against ``exp(2u) hx hy`` gives the energy
    per unit s.
    """
    grid = cfg.grid
    if dA is None:
        gA, gw = gradient(cfg, pert)
        return 0.5 * (_pointwise_sq(grid, gA, 1) + _pointwise_sq(grid, gw, 0))
    Psi = np.zeros_like(cfg.omega) if Psi is None else Psi
    g = cfg.algebra
    kA = dA - lat.covD0(grid, cfg.A, Psi)
    kw = domega + g.bracket(Psi, cfg.omega)
    return 0.5 * (_pointwise_sq(grid, kA, 1) + _pointwise_sq(grid, kw, 0))


GL3_NODES = 0.5 + 0.5 * np.array([-np.sqrt(3 / 5), 0.0, np.sqrt(3 / 5)])
GL3_WEIGHTS = np.array([5 / 18, 8 / 18, 5 / 18])


def segment_gradient(c0, c1, pert):
    """Average of the gradient along the straight segment from c0 to c1.

    Three-point Gauss-Legendre in the segment parameter; this is the
    discrete gradient used by the trajectory scheme.
    """
    gA = np.zeros_like(c0.A)
    gw = np.zeros_like(c0.omega)
    for t, w in zip(GL3_NODES, GL3_WEIGHTS):
        c = Configuration(c0.grid, (1 - t) * c0.A + t * c1.A, (1 - t) * c0.omega + t * c1.omega)
        a, b = gradient(c, pert)
        gA += w * a
        gw += w * b
    return gA, gw


def trajectoryEnergy(path, pert=None):
    """Energy of a path and its action drop.

    Returns a dict with

    * ``energy``: ``int |grad(J+h)|^2 ds`` with the segment-averaged gradient
      on each s-interval (the form in the energy identity),
    * ``energy_half``: half of that, the energy ``E_f`` with the 1/2 factor,
    * ``energy_kinetic``: the same integral using the kinetic density, i.e.
      s-differences of the path and its Psi component,
    * ``drop``: ``(J+h)(start) - (J+h)(end)``,
    * ``profile``: per-interval energy, for breaking detection.
    """
    grid = path.grid
    M = len(path.s)
    ds = np.diff(path.s)
    prof = np.zeros(M - 1)
    kin = np.zeros(M - 1)
    area = grid.site_weight(0)
    for m in range(M - 1):
        c0, c1 = path.config(m), path.config(m + 1)
        gA, gw = segment_gradient(c0, c1, pert)
        prof[m] = grid.inner(gA, gA, 1) + grid.inner(gw, gw, 0)
        cm = Configuration(grid, 0.5 * (c0.A + c1.A), 0.5 * (c0.omega + c1.omega))
        Pm = 0.5 * (path.Psi[m] + path.Psi[m + 1])
        dens = energyDensity(cm, pert, Pm, (c1.A - c0.A) / ds[m], (c1.omega - c0.omega) / ds[m])
        kin[m] = 2 * np.sum(area * dens)
    E = float(np.sum(prof * ds))
    drop = action(path.config(0), pert) - action(path.config(M - 1), pert)
    return {
        "energy": E,
        "energy_half": 0.5 * E,
        "energy_kinetic": float(np.sum(kin * ds)),
        "drop": float(drop),
        "profile": prof,
    }


def trajectoryBounds(path, pert, value_minus, value_plus):
    """A priori curvature and omega bounds along a path.

    Curvature, with ``I`` the full s-range:
    ``1/2 |F_A|^2_{L2(I x Sigma)} <= (1 + |I|) C- - C+ + |I| C_f``, where
    ``C+-`` are the endpoint actions and ``C_f`` bounds ``|h| + |Y_f|^2``.

    Omega, in root form per slice:
    ``|omega| <= |F_A| + sqrt(|F_A|^2 + 4 C_f)``; the weaker linear form
    ``1/2 |omega| <= |F_A| + C_f`` is reported alongside.
    """
    grid = path.grid
    dim = path.A.shape[-1]
    Cf = pert.constant(dim) if pert is not None and pert.active else 0.0
    M = len(path.s)
    nF = np.array([grid.norm(lat.curvature(grid, path.A[m]), 2) for m in range(M)])
    nw = np.array([grid.norm(path.omega[m], 0) for m in range(M)])
    # the curvature bound needs C_f to dominate both |h| and |Y_f|^2
    nY2 = max(grid.inner(Y, Y, 0) for Y in
              (holonomyPerturbation(path.config(m), pert)[2] for m in range(M)))
    Cf1 = Cf + nY2
    I = path.s[-1] - path.s[0]
    lhs1 = 0.5 * trapezoid(nF**2, path.s)
    rhs1 = (1 + I) * value_minus - value_plus + I * Cf1
    root = nF + np.sqrt(nF**2 + 4 * Cf)
    stated = nF + Cf
    return {
        "C_f": Cf,
        "C_f_curvature": Cf1,
        "curvature_lhs": float(lhs1),
        "curvature_rhs": float(rhs1),
        "curvature_ok": bool(lhs1 <= rhs1 + 1e-6 * (1 + abs(rhs1))),
        "omega_root_margin": float(np.min(root - nw)),
        "omega_root_ok": bool(np.all(nw <= root + 1e-6 * (1 + root))),
        "omega_linear_margin": float(np.min(stated - 0.5 * nw)),
        "omega_linear_ok": bool(np.all(0.5 * nw <= stated + 1e-6 * (1 + stated))),
    }
