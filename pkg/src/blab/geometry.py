"""The CP^1 Kahler model: normalization constants and scalar symbols.

One convention sheet (docs/conventions.md): total symplectic volume 2*pi,
so the compatible metric is the round metric of area 2*pi (radius^2 = 1/2),
the scalar Laplacian has eigenvalues 2*l*(l+1), and the volume form is half
the unit-sphere solid-angle measure.  Symbols are stored spectrally in the
standard orthonormal Y_lm basis; grids are derived caches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import harmonics
from .numerics import QuadratureGrid, grid_for_bandlimit

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class KahlerModel:
    """Normalization constants of CP^1.

    area           total symplectic volume, integral of omega
    symplectic_scale   omega = scale * (metric area form); Kahler, so 1
    poisson_scale  normalization of the bivector inverse to omega
    """

    area: float = TWO_PI
    symplectic_scale: float = 1.0
    poisson_scale: float = 1.0

    def laplace_eigenvalue(self, l) -> float:
        """Eigenvalue of the scalar Laplacian -div grad on degree-l harmonics."""
        return 2.0 * l * (l + 1.0)


CP1 = KahlerModel()


class BandlimitError(ValueError):
    """Integrand band-limit exceeds the quadrature exactness."""


@dataclass(frozen=True, eq=False)
class Symbol:
    """Band-limited function on the sphere, f = sum c_lm Y_lm.

    coeffs maps (l, m) -> complex.  Real symbols satisfy
    coeff(l,-m) = (-1)^m conj(coeff(l,m)).
    """

    coeffs: dict
    _grid_values: dict = field(default_factory=dict, repr=False)

    @property
    def bandlimit(self) -> int:
        return max((l for (l, _) in self.coeffs), default=0)

    def values(self, grid: QuadratureGrid) -> np.ndarray:
        key = id(grid)
        if key not in self._grid_values:
            two = {(2 * l, 2 * m): c for (l, m), c in self.coeffs.items()}
            # keep the grid alive so its id cannot be recycled
            self._grid_values[key] = (grid, harmonics.synthesize(0, two, grid))
        return self._grid_values[key][1]

    def is_real(self, tol: float = 1e-12) -> bool:
        for (l, m), c in self.coeffs.items():
            other = self.coeffs.get((l, -m), 0.0)
            sign = -1 if m % 2 else 1
            if abs(other - sign * np.conj(c)) > tol:
                return False
        return True

    def to_json(self) -> str:
        rows = [[l, m, float(np.real(c)), float(np.imag(c))]
                for (l, m), c in sorted(self.coeffs.items())]
        return json.dumps({"coeffs": rows})

    @staticmethod
    def from_json(text: str) -> "Symbol":
        data = json.loads(text)
        return Symbol({(int(l), int(m)): complex(re, im)
                       for l, m, re, im in data["coeffs"]})


def constant(c) -> Symbol:
    return Symbol({(0, 0): complex(c) * math.sqrt(4.0 * math.pi)})


def ylm(l: int, m: int, coeff=1.0) -> Symbol:
    return Symbol({(l, m): complex(coeff)})


def ylm_real(l: int, m: int, coeff=1.0) -> Symbol:
    """Real combination (Y_lm + conj)/norm; for m = 0 just Y_l0."""
    if m == 0:
        return Symbol({(l, 0): complex(coeff)})
    sign = -1 if m % 2 else 1
    c = complex(coeff) / math.sqrt(2.0)
    return Symbol({(l, m): c, (l, -m): sign * np.conj(c)})


def cos_theta() -> Symbol:
    """The height function cos(theta) = sqrt(4 pi / 3) Y_10."""
    return Symbol({(1, 0): math.sqrt(4.0 * math.pi / 3.0)})


def random_real_symbol(lmax: int, rng: np.random.Generator,
                       scale: float = 1.0) -> Symbol:
    """Seeded band-limited real symbol with unit-scale coefficients."""
    coeffs = {}
    for l in range(lmax + 1):
        c0 = rng.standard_normal() * scale
        coeffs[(l, 0)] = complex(c0)
        for m in range(1, l + 1):
            c = (rng.standard_normal() + 1j * rng.standard_normal()) * scale / 2
            coeffs[(l, m)] = c
            coeffs[(l, -m)] = (-1) ** m * np.conj(c)
    return Symbol(coeffs)


def default_grid(f: Symbol, headroom: int = 0) -> QuadratureGrid:
    b = f.bandlimit + headroom
    return grid_for_bandlimit(2 * b + 2, 2 * b + 2)


def laplacian(f: Symbol, model: KahlerModel = CP1) -> Symbol:
    """Coefficient-wise multiplication by laplace_eigenvalue(l)."""
    return Symbol({(l, m): model.laplace_eigenvalue(l) * c
                   for (l, m), c in f.coeffs.items()})


def integrate(f: Symbol, model: KahlerModel = CP1,
              grid: QuadratureGrid | None = None) -> complex:
    """Integral of f against the volume form.

    With a grid supplied the band-limit is checked against its exactness;
    without one the exact spectral value is used.
    """
    if grid is not None:
        if f.bandlimit > grid.exactness_degree:
            need = f.bandlimit
            raise BandlimitError(
                f"band-limit {need} exceeds grid exactness "
                f"{grid.exactness_degree}; need n_theta >= {need // 2 + 1}, "
                f"n_phi >= {need + 1}")
        return grid.integrate(f.values(grid))
    return f.coeffs.get((0, 0), 0.0) * math.sqrt(math.pi)


def evaluation_grid(n_theta: int, n_phi: int) -> QuadratureGrid:
    """Uniform grid including both poles and the equator, for sup norms.

    Carries zero quadrature weights: evaluation only, never integration.
    """
    if n_theta % 2 == 0:
        n_theta += 1
    theta = np.linspace(0.0, math.pi, n_theta)
    phi = np.arange(n_phi) * (TWO_PI / n_phi)
    return QuadratureGrid(theta=theta, phi=phi,
                          theta_weights=np.zeros(n_theta), phi_weight=0.0,
                          exactness_degree=-1)


def _refined_grid(f_bandlimit: int) -> QuadratureGrid:
    # sup norms use a uniform evaluation grid ~4x finer than the
    # oscillation scale, with poles and equator on the grid
    b = max(f_bandlimit, 1)
    return evaluation_grid(max(129, 8 * b + 1), max(128, 8 * b))


def sup_norm(f: Symbol, return_resolution: bool = False):
    """Max |f| on a refinement of the quadrature grid (reported resolution)."""
    grid = _refined_grid(f.bandlimit)
    m = float(np.max(np.abs(f.values(grid)))) if f.coeffs else 0.0
    if return_resolution:
        return m, (grid.n_theta, grid.n_phi)
    return m


def _edth_coeffs(f: Symbol, raise_spin: bool):
    """Unit-sphere edth of a scalar symbol, as spin +/-1 coefficients."""
    out = {}
    for (l, m), c in f.coeffs.items():
        if l == 0:
            continue
        lam = harmonics.lam2(2 * l, 0)
        out[(2 * l, 2 * m)] = (lam if raise_spin else -lam) * c
    return out


def gradient_values(f: Symbol, grid: QuadratureGrid) -> np.ndarray:
    """Pointwise metric norm |grad f| on the grid.

    For the area-2*pi round metric, |grad f| = sqrt(2) max(|edth f|,
    |edthb f|) pointwise (the two agree for real f).
    """
    up = harmonics.synthesize(2, _edth_coeffs(f, True), grid)
    dn = harmonics.synthesize(-2, _edth_coeffs(f, False), grid)
    return math.sqrt(2.0) * np.maximum(np.abs(up), np.abs(dn))


def gradient_sup_norm(f: Symbol, model: KahlerModel = CP1,
                      return_resolution: bool = False):
    """Sup of the pointwise metric norm of grad f on a refined grid."""
    grid = _refined_grid(f.bandlimit)
    m = float(np.max(gradient_values(f, grid))) if f.coeffs else 0.0
    if return_resolution:
        return m, (grid.n_theta, grid.n_phi)
    return m


def values_to_symbol(values: np.ndarray, lmax: int,
                     grid: QuadratureGrid) -> Symbol:
    """Project grid values onto Y_lm coefficients up to degree lmax."""
    two = harmonics.analyze(0, 2 * lmax, values, grid)
    coeffs = {(l2 // 2, m2 // 2): c for (l2, m2), c in two.items()
              if abs(c) > 0}
    return Symbol(coeffs)
