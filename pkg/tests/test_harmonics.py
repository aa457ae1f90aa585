import math

import numpy as np
import pytest
from scipy.special import lpmv

from blab import harmonics as H
from blab.numerics import gauss_legendre_sphere


@pytest.fixture(scope="module")
def grid():
    return gauss_legendre_sphere(24, 49)


def _unit_measure(grid):
    return 2.0 * grid.theta_weights[:, None] * grid.phi_weight


def _scipy_ylm(l, m, theta, phi):
    norm = math.sqrt((2 * l + 1) / (4 * math.pi)
                     * math.factorial(l - m) / math.factorial(l + m))
    return norm * lpmv(m, l, np.cos(theta)) * np.exp(1j * m * phi)


def test_spin_zero_matches_standard_harmonics(grid):
    tt, pp = np.meshgrid(grid.theta, grid.phi, indexing="ij")
    for l in range(6):
        for m in range(-l, l + 1):
            ours = H.sylm_values(0, 2 * l, 2 * m, grid)
            if m >= 0:
                ref = _scipy_ylm(l, m, tt, pp)
            else:
                ref = (-1) ** m * np.conj(_scipy_ylm(l, -m, tt, pp))
            assert np.max(np.abs(ours - ref)) < 1e-13


def test_small_d_matrices_closed_form(grid):
    th = grid.theta
    # d^{1/2} and d^1 against the standard tables
    assert np.allclose(H.wigner_d_column(1, 1, 1, th)[0], np.cos(th / 2))
    assert np.allclose(H.wigner_d_column(1, -1, 1, th)[0], -np.sin(th / 2))
    assert np.allclose(H.wigner_d_column(-1, 1, 1, th)[0], np.sin(th / 2))
    assert np.allclose(H.wigner_d_column(2, 0, 2, th)[0], -np.sin(th) / math.sqrt(2))
    assert np.allclose(H.wigner_d_column(0, 0, 2, th)[-1], np.cos(th))
    assert np.allclose(H.wigner_d_column(2, -2, 2, th)[0], (1 - np.cos(th)) / 2)


def test_recursion_matches_direct_high_l(grid):
    # spot-check l = 40 orthonormality (recursion stability)
    w = _unit_measure(grid)
    v = H.sylm_values(0, 40, 22, grid)
    assert abs(2 * 0.0 + np.sum(w * np.conj(v) * v) - 1.0) < 1e-11


@pytest.mark.parametrize("s2", [0, 1, -1, 2, -3, 4])
def test_orthonormality_per_sector(grid, s2):
    w = _unit_measure(grid)
    rng = np.random.default_rng(s2 + 10)
    keys = [(l2, m2) for l2 in range(abs(s2), abs(s2) + 9, 2)
            for m2 in range(-l2, l2 + 1, 2)]
    for _ in range(40):
        a = keys[rng.integers(len(keys))]
        b = keys[rng.integers(len(keys))]
        va = H.sylm_values(s2, *a, grid)
        vb = H.sylm_values(s2, *b, grid)
        val = np.sum(w * np.conj(va) * vb)
        assert abs(val - (1.0 if a == b else 0.0)) < 1e-12


@pytest.mark.parametrize("s2", [0, 1, -1, 2, 3, -3])
def test_conjugation_identity(grid, s2):
    for l2 in range(abs(s2), abs(s2) + 7, 2):
        for m2 in range(-l2, l2 + 1, 2):
            lhs = np.conj(H.sylm_values(s2, l2, m2, grid))
            rhs = H.conj_sign(s2, m2) * H.sylm_values(-s2, l2, -m2, grid)
            assert np.max(np.abs(lhs - rhs)) < 1e-12


def _np_edth_fd(s2, l2, m2, theta, phi, h=1e-6):
    """Newman-Penrose raising operator by finite differences."""
    s = s2 / 2.0

    def f(t, p):
        tab = H.wigner_d_column(m2, -s2, l2, np.atleast_1d(t))
        val = (H.chi_phase(s2) * math.sqrt((l2 + 1) / (4 * math.pi))
               * tab[-1][0] * np.exp(0.5j * m2 * p))
        return np.sin(t) ** (-s) * val

    dth = (f(theta + h, phi) - f(theta - h, phi)) / (2 * h)
    dph = (f(theta, phi + h) - f(theta, phi - h)) / (2 * h)
    return -np.sin(theta) ** s * (dth + 1j / np.sin(theta) * dph)


@pytest.mark.parametrize("s2,l2,m2", [
    (0, 4, 2), (0, 2, 0), (2, 6, -4), (-2, 4, 2), (-4, 6, 0),
    (1, 5, 3), (-1, 3, 1), (-1, 5, -1), (3, 7, 1), (-3, 5, 3),
])
def test_edth_ladder_against_finite_differences(s2, l2, m2):
    th, ph = 1.17, 0.53
    lhs = _np_edth_fd(s2, l2, m2, th, ph)
    lam = H.lam2(l2, s2)
    tab = H.wigner_d_column(m2, -(s2 + 2), l2, np.atleast_1d(th))
    rhs = lam * (H.chi_phase(s2 + 2) * math.sqrt((l2 + 1) / (4 * math.pi))
                 * tab[-1][0] * np.exp(0.5j * m2 * ph))
    assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(rhs))


@pytest.mark.parametrize("A,B,C", [
    ((2, 0, 2), (2, 2, 0), (4, -2, -2)),
    ((4, 0, 0), (2, 0, 0), (2, 0, 0)),
    ((3, 1, 1), (2, 2, 2), (3, -3, -3)),
    ((5, 1, 3), (4, -2, -2), (1, 1, -1)),
    ((6, 2, 0), (3, -1, 1), (3, -1, -1)),
    ((7, 3, 1), (4, -2, 0), (3, -1, -1)),
])
def test_triple_integral_matches_quadrature(grid, A, B, C):
    w = _unit_measure(grid)
    exact = H.triple_integral(*A, *B, *C)
    quad = np.sum(w
                  * H.sylm_values(A[1], A[0], A[2], grid)
                  * H.sylm_values(B[1], B[0], B[2], grid)
                  * H.sylm_values(C[1], C[0], C[2], grid))
    assert abs(exact - quad) < 1e-13


@pytest.mark.parametrize("out,f,inn", [
    ((3, 5, 1), (2, 4, 2), (1, 1, -1)),
    ((4, 6, 2), (2, 2, 2), (2, 4, 0)),
    ((-1, 3, 1), (2, 2, 0), (-3, 3, 1)),
    ((1, 5, 1), (-2, 4, 2), (3, 3, -1)),
    ((0, 4, 2), (0, 2, 1), (0, 2, 1)),
])
def test_pairing_element_matches_quadrature(grid, out, f, inn):
    w = _unit_measure(grid)
    exact = H.pairing_element(out[0], out[1], out[2],
                              f[0], f[1], f[2], inn[0], inn[1], inn[2])
    quad = np.sum(w
                  * np.conj(H.sylm_values(out[0], out[1], out[2], grid))
                  * H.sylm_values(f[0], f[1], f[2], grid)
                  * H.sylm_values(inn[0], inn[1], inn[2], grid))
    assert abs(exact - quad) < 1e-13


def test_synthesize_analyze_roundtrip(grid):
    rng = np.random.default_rng(8)
    for s2 in (0, 1, -2):
        coeffs = {}
        for l2 in range(abs(s2), abs(s2) + 9, 2):
            for m2 in range(-l2, l2 + 1, 2):
                coeffs[(l2, m2)] = complex(rng.standard_normal(),
                                           rng.standard_normal())
        vals = H.synthesize(s2, coeffs, grid)
        back = H.analyze(s2, abs(s2) + 8, vals, grid)
        for k, c in coeffs.items():
            assert abs(back[k] - c) < 1e-12
