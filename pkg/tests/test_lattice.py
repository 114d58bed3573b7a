import numpy as np
import pytest

from ymlab import lattice as lat
from ymlab.lattice import TorusGrid
from ymlab.lie import algebra


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(3, 8)
    with pytest.raises(ValueError):
        TorusGrid(8, 8, Lx=-1.0)
    with pytest.raises(ValueError):
        TorusGrid(8, 8, u=np.zeros((4, 4)))


def test_grid_roundtrip():
    g = TorusGrid(6, 5, 3.0, 2.0, 0.1 * np.ones((6, 5)))
    h = TorusGrid.from_dict(g.to_dict())
    assert g.same(h)


@pytest.mark.parametrize("group", ["u1", "su2"])
def test_adjoint_pairs_with_conformal_factor(group):
    rng = np.random.default_rng(0)
    g = TorusGrid(6, 7, 2.0, 3.0, 0.3 * rng.standard_normal((6, 7)))
    d = algebra(group).dim
    A = g.random(1, d, rng)
    phi, a, b = g.random(0, d, rng), g.random(1, d, rng), g.random(0, d, rng)
    assert np.isclose(g.inner(lat.covD0(g, A, phi), a, 1), g.inner(phi, lat.coD1(g, A, a), 0), rtol=1e-13)
    assert np.isclose(g.inner(lat.covD1(g, A, a), b, 2), g.inner(a, lat.coD2(g, A, b), 1), rtol=1e-13)


def test_abelian_dd_vanishes():
    rng = np.random.default_rng(1)
    g = TorusGrid(8, 8)
    A, phi = g.random(1, 1, rng), g.random(0, 1, rng)
    assert np.max(np.abs(lat.covD1(g, A, lat.covD0(g, A, phi)))) < 1e-12


def test_su2_dd_is_curvature_bracket_to_first_order():
    # pointwise brackets make d_A d_A = [F, .] hold only up to O(h)
    errs = []
    for n in (8, 16, 32):
        g = TorusGrid(n, n)
        x, y = g.coords()
        A = np.zeros((2, n, n, 3))
        A[0, ..., 0] = np.sin(y)
        A[1, ..., 1] = np.cos(x)
        A[1, ..., 2] = 0.5
        phi = np.stack([np.cos(x + y), np.sin(x), np.ones_like(x)], axis=-1)
        lhs = lat.covD1(g, A, lat.covD0(g, A, phi))
        rhs = algebra("su2").bracket(lat.curvature(g, A), phi)
        errs.append(np.max(np.abs(lhs - rhs)))
    assert errs[1] < 0.6 * errs[0] and errs[2] < 0.6 * errs[1]


def test_hodge_isometry_on_one_forms():
    rng = np.random.default_rng(2)
    g = TorusGrid(6, 6, u=0.4 * rng.standard_normal((6, 6)))
    a, b = g.random(1, 3, rng), g.random(1, 3, rng)
    assert np.isclose(g.inner(lat.hodge(g, a, 1), lat.hodge(g, b, 1), 1), g.inner(a, b, 1), rtol=1e-14)


def test_sparse_matrices_match_stencils():
    rng = np.random.default_rng(3)
    g = TorusGrid(5, 6)
    A = g.random(1, 3, rng)
    phi, a = g.random(0, 3, rng), g.random(1, 3, rng)
    assert np.allclose(lat.covD0_matrix(g, A) @ phi.ravel(), lat.covD0(g, A, phi).ravel())
    assert np.allclose(lat.covD1_matrix(g, A) @ a.ravel(), lat.covD1(g, A, a).ravel())


def test_constant_curvature_of_linear_potential():
    g = TorusGrid(8, 8)
    x, _ = g.coords()
    A = g.zeros(1, 1)
    # a single-valued potential with zero curl
    A[1, ..., 0] = np.sin(x)
    F = lat.curvature(g, A)
    exact = (np.sin(x + g.hx) - np.sin(x)) / g.hx
    assert np.allclose(F[..., 0], exact)
