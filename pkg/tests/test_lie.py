import numpy as np
import pytest

from ymlab.lie import algebra, quat_exp, quat_to_matrix


@pytest.mark.parametrize("name", ["u1", "su2"])
def test_bracket_antisymmetric_and_jacobi(name):
    g = algebra(name)
    rng = np.random.default_rng(0)
    x, y, z = (g.random((5,), rng) for _ in range(3))
    assert np.allclose(g.bracket(x, y), -g.bracket(y, x))
    jac = g.bracket(x, g.bracket(y, z)) + g.bracket(y, g.bracket(z, x)) + g.bracket(z, g.bracket(x, y))
    assert np.max(np.abs(jac)) < 1e-13


@pytest.mark.parametrize("name", ["u1", "su2"])
def test_bracket_matches_matrix_commutator(name):
    g = algebra(name)
    rng = np.random.default_rng(1)
    x, y = g.random((), rng), g.random((), rng)
    X, Y = g.to_matrix(x), g.to_matrix(y)
    assert np.allclose(g.to_matrix(g.bracket(x, y)), X @ Y - Y @ X)


@pytest.mark.parametrize("name", ["u1", "su2"])
def test_inner_is_ad_invariant(name):
    g = algebra(name)
    rng = np.random.default_rng(2)
    x, y, z = (g.random((), rng) for _ in range(3))
    assert abs(g.inner(g.bracket(x, y), z) + g.inner(y, g.bracket(x, z))) < 1e-13


def test_expmap_matches_scipy():
    from scipy.linalg import expm
    g = algebra("su2")
    x = g.random((), np.random.default_rng(3))
    assert np.allclose(g.expmap(x), expm(g.to_matrix(x)), atol=1e-13)


def test_quaternion_exp_is_unit():
    x = np.random.default_rng(4).standard_normal((10, 3))
    q = quat_exp(x)
    assert np.allclose(np.sum(np.abs(q) ** 2, axis=-1), 1.0)
    U = quat_to_matrix(q)
    assert np.allclose(U @ np.conj(np.swapaxes(U, -1, -2)), np.eye(2), atol=1e-13)


def test_adjoint_action_preserves_inner():
    g = algebra("su2")
    rng = np.random.default_rng(5)
    x, y = g.random((), rng), g.random((), rng)
    U = g.expmap(g.random((), rng))
    assert abs(g.inner(g.adjoint(U, x), g.adjoint(U, y)) - g.inner(x, y)) < 1e-13
