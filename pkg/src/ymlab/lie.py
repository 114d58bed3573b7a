"""Lie algebra kernel for u(1) and su(2).

Algebra elements are real coefficient arrays whose last axis runs over an
orthonormal basis of the algebra.  Group elements are explicit unitary
matrices (1x1 for U(1), 2x2 for SU(2)), with any leading batch axes.

For su(2) the basis is e_a = -i sigma_a, so that

    [e_1, e_2] = 2 e_3,    <e_a, e_b> = -1/2 tr(e_a e_b) = delta_ab.
"""
import numpy as np

__all__ = [
    "LieAlgebra",
    "U1",
    "SU2",
    "algebra",
    "algebra_of",
    "bracket",
    "inner",
    "expmap",
    "adjoint",
]

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class LieAlgebra:
    """A compact matrix Lie algebra with an orthonormal real basis.

    Parameters
    ----------
    name : str
        ``"u1"`` or ``"su2"``.
    basis : ndarray, shape (dim, n, n)
        Anti-hermitian basis matrices, orthonormal for -1/2 tr (su2) or
        for the product of phases (u1).
    """

    def __init__(self, name, basis):
        self.name = name
        self.basis = np.asarray(basis, dtype=complex)
        self.dim = self.basis.shape[0]
        self.n = self.basis.shape[1]

    def __repr__(self):
        return f"LieAlgebra({self.name!r})"

    @property
    def abelian(self):
        return self.dim == 1

    def _check(self, *xs):
        for x in xs:
            if np.shape(x)[-1] != self.dim:
                raise ValueError(
                    f"{self.name} element needs last axis {self.dim}, got shape {np.shape(x)}"
                )

    # -- algebra --------------------------------------------------------
    def bracket(self, x, y):
        """Lie bracket [x, y] in basis coefficients."""
        self._check(x, y)
        if self.abelian:
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)), dtype=np.result_type(x, y))
        return 2.0 * np.cross(x, y)

    def inner(self, x, y):
        """Ad-invariant inner product, summed over the basis axis only."""
        self._check(x, y)
        return np.sum(np.asarray(x) * np.asarray(y), axis=-1)

    def ad_matrix(self, x):
        """Matrix of ``ad_x = [x, .]`` acting on coefficient vectors.

        Returns shape ``x.shape + (dim,)``.
        """
        x = np.asarray(x)
        self._check(x)
        if self.abelian:
            return np.zeros(x.shape + (1,), dtype=x.dtype)
        out = np.zeros(x.shape + (3,), dtype=x.dtype)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        out[..., 0, 1] = -2 * x3
        out[..., 0, 2] = 2 * x2
        out[..., 1, 0] = 2 * x3
        out[..., 1, 2] = -2 * x1
        out[..., 2, 0] = -2 * x2
        out[..., 2, 1] = 2 * x1
        return out

    def to_matrix(self, x):
        """Matrix form X = sum_a x_a e_a."""
        x = np.asarray(x)
        self._check(x)
        return np.einsum("...a,aij->...ij", x, self.basis)

    def from_matrix(self, X):
        """Basis coefficients of an algebra-valued matrix.

        Uses ``x_a = tr(X e_a) / tr(e_a e_a)``; the result is real for
        anti-hermitian X and complex-analytic in the entries of X.
        """
        norms = np.einsum("aij,aji->a", self.basis, self.basis)
        c = np.einsum("...ij,aji->...a", X, self.basis) / norms
        return c

    def project(self, M):
        """Coefficients ``pi(M)_a = tr(M e_a)``, the pairing used in gradients.

        For the real part of the trace, ``d Re tr(M Z) = pi(M) . z`` after
        taking the real part; no real part is taken here so the map stays
        complex-analytic.
        """
        return np.einsum("...ij,aji->...a", M, self.basis)

    # -- group ----------------------------------------------------------
    def expmap(self, x):
        """Group exponential; closed form for both groups.

        Works for complex coefficients as an analytic continuation, which is
        used for complex-step differentiation.
        """
        x = np.asarray(x)
        self._check(x)
        if self.abelian:
            return np.exp(1j * x[..., 0])[..., None, None]
        s = np.sum(x * x, axis=-1)
        r = np.sqrt(s + 0j)
        small = np.abs(s) < 1e-8
        rs = np.where(small, 1.0, r)
        c = np.where(small, 1 - s / 2 + s * s / 24, np.cos(rs))
        sc = np.where(small, 1 - s / 6 + s * s / 120, np.sin(rs) / rs)
        eye = np.eye(2, dtype=complex)
        X = self.to_matrix(x)
        out = c[..., None, None] * eye + sc[..., None, None] * X
        if not np.iscomplexobj(x):
            return out.astype(complex)
        return out

    def adjoint(self, g, x):
        """Coefficients of g^-1 X g."""
        x = np.asarray(x)
        self._check(x)
        if self.abelian:
            return np.array(x, dtype=float, copy=True)
        X = self.to_matrix(x)
        ginv = np.conj(np.swapaxes(g, -1, -2))
        Y = ginv @ X @ g
        return np.real(self.from_matrix(Y))

    def dexp(self, x):
        """Matrix of the left-trivialized differential of exp.

        ``d exp(x)[y] = exp(x) (1 - e^{-ad_x})/ad_x (y)``; this returns the
        coefficient matrix of ``(1 - e^{-ad_x})/ad_x``, shape ``x.shape + (dim,)``.
        Analytic in x, so complex coefficients are allowed.
        """
        x = np.asarray(x)
        self._check(x)
        eye = np.eye(self.dim)
        if self.abelian:
            return np.broadcast_to(eye, x.shape + (1,)).astype(x.dtype)
        ad = self.ad_matrix(x)
        t2 = 4.0 * np.sum(x * x, axis=-1)  # theta^2, theta = 2|x|
        small = np.abs(t2) < 1e-6
        t2s = np.where(small, 1.0, t2)
        t = np.sqrt(t2s + 0j)
        a = np.where(small, 0.5 - t2 / 24 + t2 * t2 / 720, (1 - np.cos(t)) / t2s)
        b = np.where(small, 1 / 6 - t2 / 120 + t2 * t2 / 5040, (t - np.sin(t)) / (t2s * t))
        if not np.iscomplexobj(x):
            a, b = a.real, b.real
        ad2 = ad @ ad
        return eye - a[..., None, None] * ad + b[..., None, None] * ad2

    def random(self, shape=(), rng=None, scale=1.0):
        """Gaussian random coefficients with the given batch shape."""
        rng = np.random.default_rng(rng)
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        return scale * rng.standard_normal(shape + (self.dim,))

    def random_group(self, shape=(), rng=None, scale=np.pi):
        """Random group elements ``exp(x)`` with gaussian coefficients."""
        return self.expmap(self.random(shape, rng, scale))


def quat_exp(x):
    """SU(2) exponential as a real unit quaternion ``(q0, q1, q2, q3)``.

    The quaternion ``q`` stands for ``q0 I + sum_a q_a e_a``; with
    ``e_a = -i sigma_a`` the units multiply as ``e_1 e_2 = e_3``.  Real and
    analytic, so it supports complex-step differentiation.
    """
    x = np.asarray(x)
    s = np.sum(x * x, axis=-1)
    small = np.abs(s) < 1e-8
    r = np.sqrt(np.where(small, 1.0, s) + 0j)
    if not np.iscomplexobj(x):
        r = r.real
    c = np.where(small, 1 - s / 2 + s * s / 24, np.cos(r))
    sc = np.where(small, 1 - s / 6 + s * s / 120, np.sin(r) / r)
    return np.concatenate([c[..., None], sc[..., None] * x], axis=-1)


def quat_mul(p, q):
    """Hamilton product of quaternions in the ``e_a`` units."""
    p0, pv = p[..., :1], p[..., 1:]
    q0, qv = q[..., :1], q[..., 1:]
    return np.concatenate(
        [p0 * q0 - np.sum(pv * qv, axis=-1, keepdims=True), p0 * qv + q0 * pv + np.cross(pv, qv)],
        axis=-1,
    )


def quat_to_matrix(q):
    return q[..., 0, None, None] * np.eye(2) + SU2.to_matrix(q[..., 1:])


U1 = LieAlgebra("u1", np.array([[[1j]]]))
SU2 = LieAlgebra("su2", -1j * _PAULI)

_BY_NAME = {"u1": U1, "su2": SU2}
_BY_DIM = {1: U1, 3: SU2}


def algebra(name):
    """Look up an algebra by name (``"u1"`` or ``"su2"``)."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown group {name!r}; expected one of {sorted(_BY_NAME)}") from None


def algebra_of(x):
    """Infer the algebra from the size of the last axis."""
    d = np.shape(x)[-1]
    try:
        return _BY_DIM[d]
    except KeyError:
        raise ValueError(f"last axis {d} matches no supported algebra") from None


def bracket(x, y):
    if np.shape(x)[-1] != np.shape(y)[-1]:
        raise ValueError("mismatched algebra dimension")
    return algebra_of(x).bracket(x, y)


def inner(x, y):
    if np.shape(x)[-1] != np.shape(y)[-1]:
        raise ValueError("mismatched algebra dimension")
    return algebra_of(x).inner(x, y)


def expmap(x):
    return algebra_of(x).expmap(x)


def adjoint(g, x):
    return algebra_of(x).adjoint(g, x)
