import math

import numpy as np
import pytest

from blab import harmonics
from blab.numerics import (NonHermitianError, gauss_legendre_sphere,
                           hermitian_eigen, operator_norm, wigner3j)

TWO_PI = 2 * math.pi


def test_single_node_grid_carries_total_area():
    grid = gauss_legendre_sphere(1, 1)
    assert len(grid.nodes) == 1
    assert abs(grid.weights.sum() - TWO_PI) < 1e-14


def test_rejects_zero_sizes():
    with pytest.raises(ValueError):
        gauss_legendre_sphere(0, 4)
    with pytest.raises(ValueError):
        gauss_legendre_sphere(4, 0)


def test_area_is_two_pi_relative():
    for nt, np_ in ((2, 3), (7, 5), (16, 33)):
        grid = gauss_legendre_sphere(nt, np_)
        assert abs(grid.area - TWO_PI) < 1e-12 * TWO_PI


def test_integrates_single_harmonics_to_exactness():
    grid = gauss_legendre_sphere(16, 33)
    assert grid.exactness_degree == 31
    worst = 0.0
    for l in range(1, 32):
        for m in range(-l, l + 1):
            vals = harmonics.sylm_values(0, 2 * l, 2 * m, grid)
            worst = max(worst, abs(grid.integrate(vals)))
    assert worst < 1e-12


def test_pair_orthonormality():
    # products of degree <= 12 each: total theta degree 24, m spread 24
    grid = gauss_legendre_sphere(14, 26)
    rng = np.random.default_rng(0)
    for _ in range(120):
        l1, l2 = rng.integers(0, 13, size=2)
        m1 = rng.integers(-l1, l1 + 1) if l1 else 0
        m2 = rng.integers(-l2, l2 + 1) if l2 else 0
        a = harmonics.sylm_values(0, 2 * l1, 2 * m1, grid)
        b = harmonics.sylm_values(0, 2 * l2, 2 * m2, grid)
        val = 2.0 * grid.integrate(np.conj(a) * b)  # dOmega = 2 * omega
        want = 1.0 if (l1, m1) == (l2, m2) else 0.0
        assert abs(val - want) < 1e-10


def test_hermitian_eigen_identity_and_order():
    vals, vecs = hermitian_eigen(np.eye(3))
    assert np.allclose(vals, [1, 1, 1])
    vals, _ = hermitian_eigen(np.diag([2.0, -1.0]))
    assert np.allclose(vals, [-1.0, 2.0])


def test_hermitian_eigen_reconstruction_residual():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50))
    m = a + a.conj().T
    vals, vecs = hermitian_eigen(m)
    scale = operator_norm(m)
    assert operator_norm(m @ vecs - vecs * vals) <= 1e-9 * scale
    assert operator_norm(vecs.conj().T @ vecs - np.eye(50)) < 1e-9
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.all(np.isreal(vals))


def test_hermitian_eigen_rejects_nonhermitian():
    with pytest.raises(NonHermitianError):
        hermitian_eigen(np.array([[0.0, 1.0], [0.0, 0.0]]))


def _power_iteration_norm(m, iters=2000):
    a = np.asarray(m, dtype=complex)
    h = a.conj().T @ a
    rng = np.random.default_rng(3)
    v = rng.standard_normal(h.shape[0])
    v = v / np.linalg.norm(v)
    for _ in range(iters):
        v = h @ v
        v = v / np.linalg.norm(v)
    return math.sqrt(float(np.real(v.conj() @ h @ v)))


def test_operator_norm_examples():
    assert operator_norm(np.zeros((4, 4))) == 0.0
    assert abs(operator_norm(np.diag([3.0, -4.0])) - 4.0) < 1e-12


def test_operator_norm_matches_power_iteration():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((30, 20)) + 1j * rng.standard_normal((30, 20))
    assert abs(operator_norm(m) - _power_iteration_norm(m)) < 1e-8


def test_operator_norm_submultiplicative():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a = rng.standard_normal((12, 9))
        b = rng.standard_normal((9, 7))
        assert operator_norm(a @ b) <= operator_norm(a) * operator_norm(b) \
            + 1e-12


def test_wigner3j_closed_forms():
    assert abs(wigner3j(1, 1, 0, 0, 0, 0) - (-1 / math.sqrt(3))) < 1e-15
    assert wigner3j(1, 1, 1, 0, 0, 0) == 0.0          # parity selection
    assert wigner3j(1, 2, 5, 0, 0, 0) == 0.0          # triangle
    assert wigner3j(1, 1, 2, 1, 1, 1) == 0.0          # m-sum
    # stretched case (j j 2j; j j -2j) = (-1)^(2j)/sqrt(4j+1)
    for j in (1, 3, 7.5):
        val = wigner3j(j, j, 2 * j, j, j, -2 * j)
        want = (-1) ** int(2 * j) / math.sqrt(4 * j + 1)
        assert abs(val - want) < 1e-13


@pytest.mark.parametrize("j1,j2,j3", [(1, 1, 2), (2, 3, 4), (1.5, 2.5, 3),
                                      (0.5, 0.5, 1), (10, 12, 20), (40, 40, 60)])
def test_wigner3j_orthogonality_sum(j1, j2, j3):
    # brute-force sum over m1 at fixed m3
    for m3 in {-j3, j3 % 1, j3 - 1}:
        if abs(m3) > j3:
            continue
        total = 0.0
        m1 = -j1
        while m1 <= j1:
            m2 = -m3 - m1
            if abs(m2) <= j2:
                total += (2 * j3 + 1) * wigner3j(j1, j2, j3, m1, m2, m3) ** 2
            m1 += 1
        assert abs(total - 1.0) < 1e-12


def test_wigner3j_rejects_non_half_integer():
    with pytest.raises(ValueError):
        wigner3j(0.3, 1, 1, 0, 0, 0)
