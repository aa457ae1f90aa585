import math

import numpy as np
import pytest

from blab import geometry as G
from blab.geometry import CP1, Symbol
from blab.numerics import gauss_legendre_sphere

TWO_PI = 2 * math.pi


def test_model_constants():
    assert abs(CP1.area / TWO_PI - 1.0) < 1e-15
    assert CP1.laplace_eigenvalue(0) == 0.0
    vals = [CP1.laplace_eigenvalue(l) for l in range(8)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert CP1.laplace_eigenvalue(1) == 4.0


def test_symbol_roundtrip_through_grid():
    rng = np.random.default_rng(0)
    f = G.random_real_symbol(6, rng)
    grid = gauss_legendre_sphere(10, 17)
    vals = f.values(grid)
    back = G.values_to_symbol(vals, 6, grid)
    for k, c in f.coeffs.items():
        assert abs(back.coeffs.get(k, 0.0) - c) < 1e-12


def test_real_symbol_coefficient_condition():
    rng = np.random.default_rng(1)
    assert G.random_real_symbol(4, rng).is_real()
    assert not Symbol({(1, 1): 1.0}).is_real()
    grid = gauss_legendre_sphere(6, 9)
    f = G.random_real_symbol(3, np.random.default_rng(2))
    assert np.max(np.abs(f.values(grid).imag)) < 1e-13


def test_laplacian_examples():
    z = G.laplacian(G.constant(3.0))
    assert all(abs(c) == 0.0 for c in z.coeffs.values())
    f = G.ylm(1, 0)
    lf = G.laplacian(f)
    assert abs(lf.coeffs[(1, 0)] - CP1.laplace_eigenvalue(1)) < 1e-15


def test_laplacian_positivity_and_symmetry():
    rng = np.random.default_rng(3)
    f = G.random_real_symbol(4, rng)
    g = G.random_real_symbol(4, rng)
    grid = gauss_legendre_sphere(10, 17)
    lf, lg = G.laplacian(f), G.laplacian(g)
    f_lg = grid.integrate(f.values(grid) * lg.values(grid))
    g_lf = grid.integrate(g.values(grid) * lf.values(grid))
    assert abs(f_lg - g_lf) < 1e-10
    f_lf = grid.integrate(f.values(grid) * lf.values(grid))
    assert f_lf.real >= -1e-12


def test_integrate_examples():
    assert abs(G.integrate(G.constant(1.0)) - TWO_PI) < 1e-14
    for l, m in ((1, 0), (2, 1), (3, -2)):
        assert abs(G.integrate(G.ylm(l, m))) < 1e-14
    # Parseval: integral of f^2 = (1/2) sum |c|^2 for real f
    f = G.random_real_symbol(4, np.random.default_rng(4))
    grid = gauss_legendre_sphere(12, 19)
    val = grid.integrate(f.values(grid) ** 2)
    parseval = 0.5 * sum(abs(c) ** 2 for c in f.coeffs.values())
    assert abs(val - parseval) < 1e-11


def test_integrate_bandlimit_error_names_grid_size():
    f = G.ylm(9, 0)
    grid = gauss_legendre_sphere(3, 5)
    with pytest.raises(G.BandlimitError, match="n_theta"):
        G.integrate(f, grid=grid)


def test_sup_norm_examples():
    assert abs(G.sup_norm(G.constant(-2.5)) - 2.5) < 1e-14
    assert abs(G.sup_norm(G.cos_theta()) - 1.0) < 1e-14
    m, res = G.sup_norm(G.cos_theta(), return_resolution=True)
    assert res[0] > 0 and res[1] > 0


def test_sup_norm_submultiplicative_pointwise():
    rng = np.random.default_rng(5)
    for _ in range(5):
        f = G.random_real_symbol(3, rng)
        g = G.random_real_symbol(3, rng)
        grid = gauss_legendre_sphere(16, 31)
        prod = float(np.max(np.abs(f.values(grid) * g.values(grid))))
        assert prod <= G.sup_norm(f) * G.sup_norm(g) + 1e-12


def test_gradient_examples():
    assert G.gradient_sup_norm(G.constant(7.0)) == 0.0
    # |grad cos(theta)| = sqrt(2) sin(theta), max sqrt(2)
    assert abs(G.gradient_sup_norm(G.cos_theta()) - math.sqrt(2)) < 1e-12
    # Y_10 = sqrt(3/4pi) cos(theta): max |grad| = sqrt(3/(2 pi))
    assert abs(G.gradient_sup_norm(G.ylm(1, 0))
               - math.sqrt(3 / (2 * math.pi))) < 1e-12


def test_gradient_homogeneity_and_triangle():
    rng = np.random.default_rng(6)
    f = G.random_real_symbol(3, rng)
    g = G.random_real_symbol(3, rng)
    gf = G.gradient_sup_norm(f)
    assert abs(G.gradient_sup_norm(Symbol({k: -2.5 * c for k, c
                                           in f.coeffs.items()}))
               - 2.5 * gf) < 1e-10
    h = Symbol({k: f.coeffs.get(k, 0) + g.coeffs.get(k, 0)
                for k in set(f.coeffs) | set(g.coeffs)})
    assert G.gradient_sup_norm(h) <= gf + G.gradient_sup_norm(g) + 1e-10


def test_symbol_json_roundtrip():
    f = Symbol({(2, 1): 1.5 - 0.5j, (0, 0): 2.0})
    g = Symbol.from_json(f.to_json())
    assert g.coeffs == f.coeffs
