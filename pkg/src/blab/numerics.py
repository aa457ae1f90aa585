"""Language-agnostic numerical kernels.

Quadrature on the sphere, dense Hermitian/general eigendecomposition,
operator norms, and exact Wigner 3j coefficients.  Everything here is a
pure function of its arguments; all returned objects are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * math.pi


class NonHermitianError(ValueError):
    """Input matrix fails the Hermiticity tolerance."""


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Product quadrature on the sphere, exact for band-limited integrands.

    Gauss-Legendre nodes in cos(theta) crossed with a uniform phi grid.
    Weights integrate against the model volume form (total weight 2*pi,
    half the usual solid-angle measure).

    exactness_degree is the largest single-harmonic degree integrated
    exactly; products of harmonics are exact while the total polynomial
    degree in cos(theta) stays <= 2*n_theta - 1 and the total azimuthal
    frequency stays < n_phi.
    """

    theta: np.ndarray         # (n_theta,) polar nodes in (0, pi)
    phi: np.ndarray           # (n_phi,) azimuth nodes in [0, 2*pi)
    theta_weights: np.ndarray  # (n_theta,), sums to 1
    phi_weight: float          # 2*pi / n_phi
    exactness_degree: int
    _tables: dict = field(default_factory=dict, repr=False)

    @property
    def n_theta(self) -> int:
        return len(self.theta)

    @property
    def n_phi(self) -> int:
        return len(self.phi)

    @property
    def nodes(self):
        """Flattened list of (theta, phi) pairs."""
        tt, pp = np.meshgrid(self.theta, self.phi, indexing="ij")
        return list(zip(tt.ravel(), pp.ravel()))

    @property
    def weights(self) -> np.ndarray:
        """Flattened weights matching .nodes; sums to the model area 2*pi."""
        return (self.theta_weights[:, None]
                * np.full(self.n_phi, self.phi_weight)).ravel()

    @property
    def area(self) -> float:
        return float(np.sum(self.theta_weights) * self.n_phi * self.phi_weight)

    def integrate(self, values: np.ndarray) -> complex:
        """Integrate a (n_theta, n_phi) value array against the volume form."""
        return complex(np.einsum("t,tp->", self.theta_weights, values)
                       * self.phi_weight)


def gauss_legendre_sphere(n_theta: int, n_phi: int) -> QuadratureGrid:
    """Build the product quadrature grid.

    Raises ValueError for non-positive sizes.
    """
    if n_theta < 1 or n_phi < 1:
        raise ValueError("quadrature sizes must be >= 1")
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x[::-1])          # ascending theta
    theta_weights = 0.5 * w[::-1]       # volume form = (1/2) dOmega
    phi = np.arange(n_phi) * (TWO_PI / n_phi)
    exact = min(2 * n_theta - 1, n_phi - 1)
    return QuadratureGrid(theta=theta, phi=phi, theta_weights=theta_weights,
                          phi_weight=TWO_PI / n_phi, exactness_degree=exact)


def grid_for_bandlimit(theta_degree: int, max_mfreq: int | None = None,
                       margin: int = 2) -> QuadratureGrid:
    """Smallest grid that integrates total polynomial degree `theta_degree`
    in cos(theta) and azimuthal frequencies up to `max_mfreq` exactly."""
    if max_mfreq is None:
        max_mfreq = theta_degree
    n_theta = (theta_degree + margin) // 2 + 1
    n_phi = max_mfreq + margin + 1
    return gauss_legendre_sphere(max(n_theta, 1), max(n_phi, 2))


def hermitian_eigen(m: np.ndarray, tol: float = 1e-10):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, unitary eigenvector matrix).  Rejects
    matrices that are not Hermitian to `tol` (relative to the norm scale).
    """
    m = np.asarray(m)
    scale = max(1.0, float(np.linalg.norm(m, 2))) if m.size else 1.0
    if m.size and float(np.linalg.norm(m - m.conj().T, 2)) > tol * scale:
        raise NonHermitianError("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(m)
    return vals, vecs


def operator_norm(m: np.ndarray) -> float:
    """Largest singular value (0 for empty matrices)."""
    m = np.asarray(m, dtype=complex)
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


# ---------------------------------------------------------------------------
# Wigner 3j, exact
# ---------------------------------------------------------------------------

def _as_two(x, name: str) -> int:
    """Convert a half-integer to doubled-integer form; reject anything else."""
    t = 2.0 * float(x)
    ti = round(t)
    if abs(t - ti) > 1e-9:
        raise ValueError(f"{name} = {x!r} is not a half-integer")
    return int(ti)


def _fact2(two_n: int) -> int:
    """(two_n/2)! for an even nonnegative doubled-integer."""
    if two_n % 2 or two_n < 0:
        raise ValueError("factorial argument must be a nonnegative integer")
    return math.factorial(two_n // 2)


def _sqrt_fraction(p: Fraction) -> Fraction:
    """Rational approximation of sqrt(p) good to ~2^-64 relative."""
    if p == 0:
        return Fraction(0)
    num, den = p.numerator, p.denominator
    shift = 130
    s = math.isqrt((num * den) << (2 * shift))
    return Fraction(s, den << shift)


@lru_cache(maxsize=1 << 18)
def _wigner3j_two(tj1, tj2, tj3, tm1, tm2, tm3) -> float:
    # selection rules: return exact 0 when any fails
    if (tm1 + tm2 + tm3) != 0:
        return 0.0
    if (tj1 + tj2 + tj3) % 2 != 0:
        return 0.0
    if tj3 > tj1 + tj2 or tj3 < abs(tj1 - tj2):
        return 0.0
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        if abs(tm) > tj or (tj - tm) % 2 != 0:
            return 0.0

    # Racah's single-sum form, carried out in exact rationals.
    delta = Fraction(
        _fact2(tj1 + tj2 - tj3) * _fact2(tj1 - tj2 + tj3)
        * _fact2(-tj1 + tj2 + tj3),
        _fact2(tj1 + tj2 + tj3 + 2),
    )
    pref = delta * Fraction(
        _fact2(tj1 + tm1) * _fact2(tj1 - tm1)
        * _fact2(tj2 + tm2) * _fact2(tj2 - tm2)
        * _fact2(tj3 + tm3) * _fact2(tj3 - tm3)
    )

    tmin = max(0, tj2 - tj3 - tm1, tj1 - tj3 + tm2)
    tmax = min(tj1 + tj2 - tj3, tj1 - tm1, tj2 + tm2)
    total = Fraction(0)
    for tt in range(tmin, tmax + 2, 2):
        den = (
            _fact2(tt) * _fact2(tj1 + tj2 - tj3 - tt)
            * _fact2(tj1 - tm1 - tt) * _fact2(tj2 + tm2 - tt)
            * _fact2(tj3 - tj2 + tm1 + tt) * _fact2(tj3 - tj1 - tm2 + tt)
        )
        term = Fraction(1, den)
        total += -term if (tt // 2) % 2 else term
    if total == 0:
        return 0.0

    phase = -1 if ((tj1 - tj2 - tm3) // 2) % 2 else 1
    return float(phase * total * _sqrt_fraction(pref))


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol for (half-)integer arguments, evaluated exactly.

    The value is computed in exact big-integer rationals and emitted as a
    float; selection-rule failures give an exact 0.0.
    """
    return _wigner3j_two(_as_two(j1, "j1"), _as_two(j2, "j2"),
                         _as_two(j3, "j3"), _as_two(m1, "m1"),
                         _as_two(m2, "m2"), _as_two(m3, "m3"))
