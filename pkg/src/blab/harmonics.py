"""Spin-weighted spherical harmonics and their exact ladder structure.

Conventions (see docs/conventions.md for the full sheet):

  sYlm(theta, phi) = chi(s) * sqrt((2l+1)/4pi) * d^l_{m,-s}(theta) * e^{i m phi}

with the standard Wigner little-d and chi(s) = (-1)^floor(s).  This pins

  * s = 0 reduces to the usual orthonormal Y_lm (Condon-Shortley),
  * raising  edth  sYlm = +sqrt((l-s)(l+s+1)) (s+1)Y_lm,
  * lowering edthb sYlm = -sqrt((l+s)(l-s+1)) (s-1)Y_lm,
  * conj(sYlm) = sigma(s) (-1)^(s+m) (-s)Y_{l,-m},

where edth/edthb are the unit-sphere Newman-Penrose operators and
sigma(s) = +1 for integer spin, -1 for half-integer spin.  The sector sign
is forced: no phase choice satisfies the ladder across the half-integer
chain and a sign-free conjugation rule simultaneously.  All l, m, s may be
half-integers (doubled-integer arguments throughout, suffix "2").
"""

from __future__ import annotations

import math

import numpy as np

from .numerics import QuadratureGrid

FOUR_PI = 4.0 * math.pi


def lam2(l2: int, s2: int) -> float:
    """Raising-ladder coefficient sqrt((l-s)(l+s+1)), doubled-int arguments."""
    prod = (l2 - s2) * (l2 + s2 + 2)
    return math.sqrt(prod) / 2.0 if prod > 0 else 0.0


def chi_phase(s2: int) -> int:
    """Overall per-spin sign in the sYlm definition: (-1)^floor(s)."""
    return -1 if (s2 // 2) % 2 else 1


def conj_sign(s2: int, m2: int) -> int:
    """Sign in conj(sYlm) = conj_sign * (-s)Y_{l,-m}."""
    sector = -1 if s2 % 2 else 1
    return -sector if ((s2 + m2) // 2) % 2 else sector


def _d_start(m2: int, s2: int, c: np.ndarray, s: np.ndarray) -> np.ndarray:
    """d^{l0}_{m,s}(theta) at l0 = max(|m|,|s|), on cos/sin of theta/2."""
    if abs(m2) < abs(s2):
        # d^j_{m,s} = (-1)^{m-s} d^j_{s,m}
        sign = -1 if ((m2 - s2) // 2) % 2 else 1
        return sign * _d_start(s2, m2, c, s)
    j2 = abs(m2)
    lognorm = 0.5 * (math.lgamma(j2 + 1)
                     - math.lgamma((j2 + s2) / 2 + 1)
                     - math.lgamma((j2 - s2) / 2 + 1))
    norm = math.exp(lognorm)
    if m2 >= 0:
        sign = -1 if ((j2 - s2) // 2) % 2 else 1
        return sign * norm * c ** ((j2 + s2) // 2) * s ** ((j2 - s2) // 2)
    return norm * c ** ((j2 - s2) // 2) * s ** ((j2 + s2) // 2)


def wigner_d_column(m2: int, s2: int, lmax2: int,
                    theta: np.ndarray) -> np.ndarray:
    """d^l_{m,s}(theta) for l = max(|m|,|s|) .. lmax, shape (n_l, len(theta)).

    Upward three-term recursion in l; stable for the cutoffs used here.
    """
    l02 = max(abs(m2), abs(s2))
    if lmax2 < l02 or (lmax2 - l02) % 2:
        raise ValueError("lmax incompatible with (m, s)")
    x = np.cos(theta)
    ch, sh = np.cos(theta / 2.0), np.sin(theta / 2.0)
    n_l = (lmax2 - l02) // 2 + 1
    out = np.empty((n_l, len(theta)))
    out[0] = _d_start(m2, s2, ch, sh)
    if n_l == 1:
        return out
    m, s = m2 / 2.0, s2 / 2.0
    l0 = l02 / 2.0
    if l02 == 0:
        out[1] = x * out[0]
        start = 1.0
        from_idx = 1
    else:
        l = l0
        num = (2 * l + 1) * (l * (l + 1) * x - m * s)
        den = l * math.sqrt(((l + 1) ** 2 - m * m) * ((l + 1) ** 2 - s * s))
        out[1] = num * out[0] / den
        start = l0 + 1.0
        from_idx = 1
    l = start
    for k in range(from_idx, n_l - 1):
        ud = math.sqrt((l * l - m * m) * (l * l - s * s))
        dd = math.sqrt(((l + 1) ** 2 - m * m) * ((l + 1) ** 2 - s * s))
        out[k + 1] = ((2 * l + 1) * (l * (l + 1) * x - m * s) * out[k]
                      - (l + 1) * ud * out[k - 1]) / (l * dd)
        l += 1.0
    return out


def sylm_theta_table(s2: int, lmax2: int, grid: QuadratureGrid) -> dict:
    """Theta-part tables of sYlm on the grid, cached on the grid object.

    Returns {l2: array[(2l+1 values of m), n_theta]} containing
    chi(s) sqrt((2l+1)/4pi) d^l_{m,-s}(theta); the azimuthal factor
    e^{i m phi} is supplied separately.
    """
    key = ("sylm", s2, lmax2)
    if key in grid._tables:
        return grid._tables[key]
    chi = chi_phase(s2)
    table: dict[int, np.ndarray] = {}
    cols = {}
    for m2 in range(-lmax2, lmax2 + 1, 2):
        if max(abs(m2), abs(s2)) > lmax2:
            continue
        cols[m2] = wigner_d_column(m2, -s2, lmax2, grid.theta)
    for l2 in range(abs(s2), lmax2 + 1, 2):
        n_m = l2 + 1
        block = np.empty((n_m, grid.n_theta))
        norm = chi * math.sqrt((l2 + 1) / FOUR_PI)
        for i, m2 in enumerate(range(-l2, l2 + 1, 2)):
            l02 = max(abs(m2), abs(s2))
            block[i] = norm * cols[m2][(l2 - l02) // 2]
        table[l2] = block
    grid._tables[key] = table
    return table


def phi_phases(m2: int, grid: QuadratureGrid) -> np.ndarray:
    """e^{i m phi} on the phi nodes (m may be a half-integer)."""
    key = ("phase", m2)
    if key not in grid._tables:
        grid._tables[key] = np.exp(0.5j * m2 * grid.phi)
    return grid._tables[key]


def sylm_values(s2: int, l2: int, m2: int, grid: QuadratureGrid) -> np.ndarray:
    """Values of sYlm on the (n_theta, n_phi) grid."""
    table = sylm_theta_table(s2, l2, grid)
    th = table[l2][(m2 + l2) // 2]
    return th[:, None] * phi_phases(m2, grid)[None, :]


def synthesize(s2: int, coeffs: dict, grid: QuadratureGrid) -> np.ndarray:
    """Field values from {(l2, m2): c} coefficients in the sYlm basis."""
    vals = np.zeros((grid.n_theta, grid.n_phi), dtype=complex)
    if not coeffs:
        return vals
    lmax2 = max(l2 for (l2, _) in coeffs)
    table = sylm_theta_table(s2, lmax2, grid)
    for (l2, m2), c in coeffs.items():
        if c == 0:
            continue
        th = table[l2][(m2 + l2) // 2]
        vals += c * th[:, None] * phi_phases(m2, grid)[None, :]
    return vals


def analyze(s2: int, lmax2: int, values: np.ndarray,
            grid: QuadratureGrid) -> dict:
    """Project grid values onto sYlm coefficients (unit-sphere measure).

    Exact for band-limited fields within the grid's exactness.
    """
    table = sylm_theta_table(s2, lmax2, grid)
    # dOmega = 2 * volume-form weights
    wth = 2.0 * grid.theta_weights * grid.phi_weight
    coeffs = {}
    for l2, block in table.items():
        for i, m2 in enumerate(range(-l2, l2 + 1, 2)):
            integ = block[i] * wth
            c = np.einsum("t,tp,p->", integ, values,
                          np.conj(phi_phases(m2, grid)))
            coeffs[(l2, m2)] = complex(c)
    return coeffs


def triple_integral(l2a: int, s2a: int, m2a: int,
                    l2b: int, s2b: int, m2b: int,
                    l2c: int, s2c: int, m2c: int) -> float:
    """Exact integral of a product of three sYlm over the unit sphere.

    Nonzero only when the spins and the m's each sum to zero.  The
    chi-phase product in front of the double-3j formula is carried
    explicitly so the value matches grid quadrature in every spin sector.
    """
    from .numerics import _wigner3j_two

    if (s2a + s2b + s2c) != 0 or (m2a + m2b + m2c) != 0:
        return 0.0
    pref = (chi_phase(s2a) * chi_phase(s2b) * chi_phase(s2c)
            * math.sqrt((l2a + 1) * (l2b + 1) * (l2c + 1) / FOUR_PI))
    return (pref
            * _wigner3j_two(l2a, l2b, l2c, m2a, m2b, m2c)
            * _wigner3j_two(l2a, l2b, l2c, -s2a, -s2b, -s2c))


def pairing_element(s2out: int, l2out: int, m2out: int,
                    s2f: int, l2f: int, m2f: int,
                    s2in: int, l2in: int, m2in: int) -> complex:
    """<out | field * in> over the unit sphere, all three in sYlm basis.

    Matrix element of multiplication by the spin-s2f harmonic between
    monopole harmonics; used for exact Galerkin assembly.
    """
    if s2out != s2f + s2in or m2out != m2f + m2in:
        return 0.0
    return conj_sign(s2out, m2out) * triple_integral(
        l2out, -s2out, -m2out, l2f, s2f, m2f, l2in, s2in, m2in)
