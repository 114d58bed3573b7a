"""Discrete covariant exterior calculus on a periodic torus grid.

All fields live at grid vertices.  Array layout, with ``d`` the algebra
dimension:

* 0-forms and 2-forms: ``(Nx, Ny, d)``; a 2-form stores the coefficient of
  ``dx ^ dy``.
* 1-forms: ``(2, Nx, Ny, d)``, components along ``dx`` and ``dy``.

The metric is ``exp(2u) (dx^2 + dy^2)``.  The L2 weights per site are
``exp(2u) hx hy`` on 0-forms, ``hx hy`` on 1-forms and ``exp(-2u) hx hy`` on
2-forms.  ``d_A`` uses forward differences with the bracket evaluated at the
site; ``d_A^*`` is its exact transpose for these weights (backward
differences).
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lie import algebra_of

__all__ = [
    "TorusGrid",
    "covD0",
    "covD1",
    "coD1",
    "coD2",
    "hodge",
    "curvature",
]


@dataclass(frozen=True, eq=False)
class TorusGrid:
    """Uniform periodic grid on the flat torus ``[0, Lx) x [0, Ly)``.

    Parameters
    ----------
    Nx, Ny : int
        Sites per direction, at least 4.
    Lx, Ly : float
        Side lengths.
    u : ndarray of shape (Nx, Ny), optional
        Conformal factor; the metric is ``exp(2u)(dx^2 + dy^2)``.
    """

    Nx: int
    Ny: int
    Lx: float = 2 * np.pi
    Ly: float = 2 * np.pi
    u: np.ndarray = field(default=None)

    def __post_init__(self):
        if int(self.Nx) < 4 or int(self.Ny) < 4:
            raise ValueError("grid needs at least 4 sites per direction")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("side lengths must be positive")
        u = np.zeros((self.Nx, self.Ny)) if self.u is None else np.asarray(self.u, float)
        if u.shape != (self.Nx, self.Ny):
            raise ValueError(f"conformal factor shape {u.shape} != {(self.Nx, self.Ny)}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "_cache", {})

    @property
    def hx(self):
        return self.Lx / self.Nx

    @property
    def hy(self):
        return self.Ly / self.Ny

    @property
    def h(self):
        return (self.hx, self.hy)

    @property
    def shape(self):
        return (self.Nx, self.Ny)

    @property
    def nsites(self):
        return self.Nx * self.Ny

    @property
    def flat(self):
        return not np.any(self.u)

    def coords(self):
        """Site coordinates ``(x, y)``, each of shape (Nx, Ny)."""
        x = np.arange(self.Nx) * self.hx
        y = np.arange(self.Ny) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def same(self, other):
        return (
            self.Nx == other.Nx
            and self.Ny == other.Ny
            and self.Lx == other.Lx
            and self.Ly == other.Ly
            and np.array_equal(self.u, other.u)
        )

    def to_dict(self):
        return {
            "Nx": self.Nx,
            "Ny": self.Ny,
            "Lx": self.Lx,
            "Ly": self.Ly,
            "u": None if self.flat else self.u.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        u = d.get("u")
        return cls(int(d["Nx"]), int(d["Ny"]), float(d["Lx"]), float(d["Ly"]),
                   None if u is None else np.asarray(u, float))

    # -- weights and inner products ----------------------------------------
    def site_weight(self, degree):
        """Per-site L2 weight of a k-form, shape (Nx, Ny)."""
        a = self.hx * self.hy
        if degree == 0:
            return a * np.exp(2 * self.u)
        if degree == 1:
            return np.full(self.shape, a)
        if degree == 2:
            return a * np.exp(-2 * self.u)
        raise ValueError(f"bad degree {degree}")

    def weight(self, degree, dim):
        """Weights broadcast to the full field layout of a k-form."""
        w = np.repeat(self.site_weight(degree)[..., None], dim, axis=-1)
        if degree == 1:
            w = np.stack([w, w])
        return w

    def inner(self, a, b, degree):
        """L2 inner product of two k-forms."""
        a = np.asarray(a)
        w = self.weight(degree, a.shape[-1])
        return float(np.sum(w * a * np.asarray(b)))

    def norm(self, a, degree):
        return np.sqrt(max(self.inner(a, a, degree), 0.0))

    def zeros(self, degree, dim):
        if degree == 1:
            return np.zeros((2, self.Nx, self.Ny, dim))
        return np.zeros((self.Nx, self.Ny, dim))

    def random(self, degree, dim, rng=None, scale=1.0):
        rng = np.random.default_rng(rng)
        return scale * rng.standard_normal(self.zeros(degree, dim).shape)

    def check(self, a, degree):
        a = np.asarray(a)
        want = (2, self.Nx, self.Ny) if degree == 1 else (self.Nx, self.Ny)
        if a.shape[:-1] != want:
            raise ValueError(f"{degree}-form of shape {a.shape} does not match grid {self.shape}")
        return a

    # -- sparse building blocks ---------------------------------------------
    def size(self, degree, dim):
        return (2 if degree == 1 else 1) * self.nsites * dim

    def shift_matrix(self, axis, dim, step=1):
        """Sparse ``(P f)(n) = f(n + step e_axis)`` on a flattened 0-form."""
        key = ("shift", axis, dim, step)
        if key not in self._cache:
            self._cache[key] = self._shift_matrix(axis, dim, step)
        return self._cache[key]

    def _shift_matrix(self, axis, dim, step):
        i, j = np.meshgrid(np.arange(self.Nx), np.arange(self.Ny), indexing="ij")
        if axis == 0:
            ii, jj = (i + step) % self.Nx, j
        else:
            ii, jj = i, (j + step) % self.Ny
        rows = (i * self.Ny + j).ravel()
        cols = (ii * self.Ny + jj).ravel()
        n = self.nsites
        P = sp.csr_matrix((np.ones(n), (rows, cols)), shape=(n, n))
        return sp.kron(P, sp.identity(dim), format="csr")

    def diff_matrix(self, axis, dim):
        """Forward difference ``(f(n + e) - f(n)) / h`` along an axis."""
        key = ("diff", axis, dim)
        if key not in self._cache:
            h = self.hx if axis == 0 else self.hy
            n = self.nsites * dim
            self._cache[key] = ((self.shift_matrix(axis, dim) - sp.identity(n)) / h).tocsr()
        return self._cache[key]

    def sqrt_weight(self, degree, dim):
        """Diagonal of W^(1/2), mapping raw to orthonormal coordinates."""
        key = ("sqrtw", degree, dim)
        if key not in self._cache:
            self._cache[key] = np.sqrt(self.weight(degree, dim)).ravel()
        return self._cache[key]


def _grid_dim(grid, *fields):
    d = np.shape(fields[0])[-1]
    for f in fields:
        if np.shape(f)[-1] != d:
            raise ValueError("fields have mismatched algebra dimension")
    return d


def _fwd(f, axis, h):
    return (np.roll(f, -1, axis=axis) - f) / h


def _bwd(f, axis, h):
    return (f - np.roll(f, 1, axis=axis)) / h


def covD0(grid, A, phi):
    """Covariant derivative of a 0-form: ``d_A phi = d phi + [A, phi]``."""
    grid.check(A, 1)
    grid.check(phi, 0)
    _grid_dim(grid, A, phi)
    g = algebra_of(phi)
    return np.stack(
        [
            _fwd(phi, 0, grid.hx) + g.bracket(A[0], phi),
            _fwd(phi, 1, grid.hy) + g.bracket(A[1], phi),
        ]
    )


def covD1(grid, A, alpha):
    """Covariant derivative of a 1-form, a 2-form coefficient.

    ``D1 a2 - D2 a1 + [A1, a2] - [A2, a1]``.
    """
    grid.check(A, 1)
    grid.check(alpha, 1)
    _grid_dim(grid, A, alpha)
    g = algebra_of(alpha)
    return (
        _fwd(alpha[1], 0, grid.hx)
        - _fwd(alpha[0], 1, grid.hy)
        + g.bracket(A[0], alpha[1])
        - g.bracket(A[1], alpha[0])
    )


def coD1(grid, A, alpha):
    """Metric transpose of ``covD0``: 1-forms to 0-forms."""
    grid.check(A, 1)
    grid.check(alpha, 1)
    _grid_dim(grid, A, alpha)
    g = algebra_of(alpha)
    div = (
        _bwd(alpha[0], 0, grid.hx)
        + _bwd(alpha[1], 1, grid.hy)
        + g.bracket(A[0], alpha[0])
        + g.bracket(A[1], alpha[1])
    )
    return -np.exp(-2 * grid.u)[..., None] * div


def coD2(grid, A, beta):
    """Metric transpose of ``covD1``: 2-forms to 1-forms."""
    grid.check(A, 1)
    grid.check(beta, 0)
    _grid_dim(grid, A, beta)
    g = algebra_of(beta)
    gam = np.exp(-2 * grid.u)[..., None] * beta
    return np.stack(
        [
            _bwd(gam, 1, grid.hy) + g.bracket(A[1], gam),
            -_bwd(gam, 0, grid.hx) - g.bracket(A[0], gam),
        ]
    )


def hodge(grid, form, degree):
    """Hodge star of a k-form on the conformal torus.

    0 -> 2 multiplies by ``exp(2u)``, 2 -> 0 by ``exp(-2u)`` and on 1-forms
    ``*(a1, a2) = (-a2, a1)``, i.e. ``*dx = dy``.
    """
    form = np.asarray(form)
    if degree == 0:
        return np.exp(2 * grid.u)[..., None] * form
    if degree == 1:
        return np.stack([-form[1], form[0]])
    if degree == 2:
        return np.exp(-2 * grid.u)[..., None] * form
    raise ValueError(f"bad degree {degree}")


def curvature(grid, A):
    """Curvature 2-form ``D1 A2 - D2 A1 + [A1, A2]``."""
    grid.check(A, 1)
    g = algebra_of(A)
    return _fwd(A[1], 0, grid.hx) - _fwd(A[0], 1, grid.hy) + g.bracket(A[0], A[1])


# -- sparse matrix forms -------------------------------------------------------
def site_block_diag(blocks):
    """Block-diagonal sparse matrix from per-site (d, d) blocks."""
    blocks = np.asarray(blocks)
    d = blocks.shape[-1]
    blocks = blocks.reshape(-1, d, d)
    if d == 1:
        return sp.diags(blocks[:, 0, 0], format="csr")
    return sp.block_diag(list(blocks), format="csr")


def ad_field(omega):
    """Sparse matrix of pointwise ``psi -> [omega, psi]`` on 0-forms."""
    g = algebra_of(omega)
    return site_block_diag(g.ad_matrix(omega))


def covD0_matrix(grid, A):
    """Raw-coordinate sparse matrix of ``phi -> d_A phi``."""
    d = np.shape(A)[-1]
    return sp.vstack(
        [
            grid.diff_matrix(0, d) + ad_field(A[0]),
            grid.diff_matrix(1, d) + ad_field(A[1]),
        ],
        format="csr",
    )


def covD1_matrix(grid, A):
    """Raw-coordinate sparse matrix of ``alpha -> d_A alpha``."""
    d = np.shape(A)[-1]
    return sp.hstack(
        [
            -grid.diff_matrix(1, d) - ad_field(A[1]),
            grid.diff_matrix(0, d) + ad_field(A[0]),
        ],
        format="csr",
    )


def orthonormal(grid, M, deg_out, deg_in, dim):
    """Express a raw-coordinate operator in L2-orthonormal coordinates."""
    so = sp.diags(grid.sqrt_weight(deg_out, dim))
    si = sp.diags(1.0 / grid.sqrt_weight(deg_in, dim))
    return (so @ M @ si).tocsr()
