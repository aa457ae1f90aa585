"""Toeplitz and geometric quantization maps and convergence diagnostics.

All compressions to the holomorphic subspace are computed through the
orthonormal basis and quadrature pairing; only the projector-commutator
diagnostic forms an explicit ambient projector.  Bounds quote the
spectral-gap constant from the curvature computation, never a hand-tuned
number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bundles, dolbeault, geometry, harmonics
from .bundles import BundleSpec, HilbertBasis, SectionOfV, SpinField
from .geometry import CP1, Symbol
from .numerics import QuadratureGrid, grid_for_bandlimit, operator_norm

_h_cache: dict = {}
_scalar_gap_const = None


def h_basis(N: int) -> HilbertBasis:
    if N not in _h_cache:
        _h_cache[N] = bundles.h_space(N)
    return _h_cache[N]


def scalar_gap_constant() -> float:
    """Spectral-gap constant of the untwisted operator (trivial bundle)."""
    global _scalar_gap_const
    if _scalar_gap_const is None:
        _scalar_gap_const = dolbeault.weitzenbock_constant(
            bundles.trivial_bundle())
    return _scalar_gap_const


@dataclass(frozen=True)
class QuantOperator:
    """Matrix tagged with its row/column spaces and provenance."""

    matrix: np.ndarray
    N: int
    row_space: tuple
    col_space: tuple
    provenance: str

    @property
    def norm(self) -> float:
        return operator_norm(self.matrix)

    def __matmul__(self, other: "QuantOperator") -> "QuantOperator":
        if self.col_space != other.row_space:
            raise ValueError("space tags do not match in composition")
        return QuantOperator(self.matrix @ other.matrix, self.N,
                             self.row_space, other.col_space, "product")


def _h_values(N: int, grid: QuadratureGrid) -> np.ndarray:
    """Values of the orthonormal H_N basis, shape (N+1, nt, np)."""
    key = ("hvals", N)
    if key not in grid._tables:
        basis = h_basis(N)
        grid._tables[key] = basis.component_values(grid, 0, 0)
    return grid._tables[key]


def toeplitz_grid(N: int, extra_band: int) -> QuadratureGrid:
    b = N + extra_band
    return grid_for_bandlimit(b + 2, b + 2)


def _project_rows(N: int, grid: QuadratureGrid,
                  fields: np.ndarray) -> np.ndarray:
    """Pair each field (k, nt, np) with the H_N basis: out[j,k] = <e_j, field_k>."""
    hv = _h_values(N, grid)
    w = grid.theta_weights
    return np.einsum("jtp,ktp,t->jk", np.conj(hv), fields, w) * grid.phi_weight


def toeplitz_values(values: np.ndarray, N: int,
                    grid: QuadratureGrid) -> np.ndarray:
    """Matrix of multiplication-then-project for a value field."""
    hv = _h_values(N, grid)
    w = grid.theta_weights
    return np.einsum("jtp,tp,ktp,t->jk", np.conj(hv), values, hv,
                     w) * grid.phi_weight


def toeplitz(f: Symbol, N: int,
             grid: QuadratureGrid | None = None) -> QuantOperator:
    """Compression of multiplication by f to the holomorphic subspace."""
    if grid is None:
        grid = toeplitz_grid(N, f.bandlimit)
    if N + f.bandlimit > 2 * grid.n_theta - 1:
        raise geometry.BandlimitError(
            f"grid too small for T_{N} of band-limit {f.bandlimit}")
    mat = toeplitz_values(f.values(grid), N, grid)
    tag = ("H", (0,), N)
    return QuantOperator(mat, N, tag, tag, "toeplitz")


def _section_deg0_values(v: SectionOfV, e_basis: HilbertBasis,
                         grid: QuadratureGrid) -> np.ndarray:
    return bundles.pair_section(v, e_basis, grid)


def toeplitz_module(v: SectionOfV, V: BundleSpec, N: int,
                    e_basis: HilbertBasis | None = None,
                    grid: QuadratureGrid | None = None) -> QuantOperator:
    """Rectangular matrix Hom(E_N^V, H_N): contract with v, then project."""
    if v.bundle.degrees != V.degrees:
        raise ValueError("section bundle does not match V")
    if e_basis is None:
        e_basis = bundles.e_space(V, N)
    if grid is None:
        grid = toeplitz_grid(N, v.bandlimit2 // 2 + e_basis.index.lmax2 // 2)
    fields = _section_deg0_values(v, e_basis, grid)
    mat = _project_rows(N, grid, fields)
    return QuantOperator(mat, N, ("H", (0,), N), ("E", V.degrees, N),
                         "toeplitz")


# ---------------------------------------------------------------------------
# Geometric quantization
# ---------------------------------------------------------------------------

def _scalar_correction_fields(f: Symbol, N: int, grid: QuadratureGrid):
    """Values of the Poisson-directional correction applied to each H_N
    basis element: (1/N) [ (edth f)(edthb e_k) - (edthb f)(edth e_k) ]."""
    s2 = N
    l2 = N
    up_f = harmonics.synthesize(
        2, {(2 * l, 2 * m): harmonics.lam2(2 * l, 0) * c
            for (l, m), c in f.coeffs.items() if l > 0}, grid)
    dn_f = harmonics.synthesize(
        -2, {(2 * l, 2 * m): -harmonics.lam2(2 * l, 0) * c
             for (l, m), c in f.coeffs.items() if l > 0}, grid)
    lam_dn = -harmonics.lam2(l2, -s2)     # edthb on the kernel multiplet
    lam_up = harmonics.lam2(l2, s2)       # 0: holomorphic sections
    basis = h_basis(N)
    rows = basis.index.block_rows(0, 0)
    out = np.zeros((basis.dim, grid.n_theta, grid.n_phi), dtype=complex)
    table_dn = harmonics.sylm_theta_table(s2 - 2, l2, grid)
    for k in range(basis.dim):
        r = rows[np.argmax(np.abs(basis.vectors[rows, k]))]
        m2 = int(basis.index.m2[r])
        coef = basis.vectors[r, k]
        e_dn = (table_dn[l2][(m2 + l2) // 2][:, None]
                * harmonics.phi_phases(m2, grid)[None, :])
        out[k] = up_f * (lam_dn * coef * e_dn)
        if lam_up:
            table_up = harmonics.sylm_theta_table(s2 + 2, l2, grid)
            e_up = (table_up[l2][(m2 + l2) // 2][:, None]
                    * harmonics.phi_phases(m2, grid)[None, :])
            out[k] -= dn_f * (lam_up * coef * e_up)
    return out / N


def geometric(f: Symbol, N: int, path: str = "tuynman",
              grid: QuadratureGrid | None = None) -> QuantOperator:
    """Geometric quantization of a scalar symbol.

    path="tuynman" computes T_N(f + Lap f / 2N); path="direct" evaluates
    the Poisson-directional-derivative definition and exists as the
    independent cross-check route.
    """
    if path == "tuynman":
        g = Symbol({k: c for k, c in f.coeffs.items()})
        lap = geometry.laplacian(f)
        coeffs = dict(g.coeffs)
        for k, c in lap.coeffs.items():
            coeffs[k] = coeffs.get(k, 0.0) + c / (2.0 * N)
        op = toeplitz(Symbol(coeffs), N, grid)
        return QuantOperator(op.matrix, N, op.row_space, op.col_space,
                             "geometric")
    if path != "direct":
        raise ValueError("path must be 'tuynman' or 'direct'")
    if grid is None:
        grid = toeplitz_grid(N, f.bandlimit + 1)
    hv = _h_values(N, grid)
    fields = f.values(grid)[None, :, :] * hv
    fields = fields + _scalar_correction_fields(f, N, grid)
    mat = _project_rows(N, grid, fields)
    tag = ("H", (0,), N)
    return QuantOperator(mat, N, tag, tag, "geometric")


def tuynman_residual(f: Symbol, N: int,
                     grid: QuadratureGrid | None = None) -> float:
    """Norm difference between the two geometric-quantization routes."""
    a = geometric(f, N, path="tuynman", grid=grid)
    b = geometric(f, N, path="direct", grid=grid)
    return operator_norm(a.matrix - b.matrix)


def _covariant_edth_section(v: SectionOfV, raise_spin: bool):
    """Covariant edth/edthb of a section of V (includes the V-side
    potential blocks, transposed with a sign from the stored dual side)."""
    V = v.bundle
    out = []
    for i in range(V.rank):
        f = v.components[i]
        base = (bundles.edth_field(f) if raise_spin
                else bundles.edthb_field(f))
        coeffs = dict(base.coeffs)
        if V.potential is not None:
            for j in range(V.rank):
                if raise_spin:
                    blk = V.potential.blocks.get((j, i))
                    a_v = None if blk is None else blk.scaled(-1.0)
                else:
                    blk = V.potential.down_block(j, i, V.rank)
                    a_v = None if blk is None else blk.scaled(-1.0)
                if a_v is None:
                    continue
                prod = _field_product(a_v, v.components[j])
                for k, c in prod.items():
                    coeffs[k] = coeffs.get(k, 0.0) + c
        out.append(SpinField(base.s2, coeffs))
    return out


def _field_product(f: SpinField, g: SpinField) -> dict:
    """Coefficients of the pointwise product f*g via an exact grid."""
    b = f.bandlimit2 + g.bandlimit2
    grid = grid_for_bandlimit(b + 2, b + 2)
    vals = f.values(grid) * g.values(grid)
    coeffs = harmonics.analyze(f.s2 + g.s2, b, vals, grid)
    return {k: c for k, c in coeffs.items() if abs(c) > 1e-15}


def _covariant_edth_basis_values(e_basis: HilbertBasis, i: int,
                                 raise_spin: bool,
                                 grid: QuadratureGrid) -> np.ndarray:
    """Grid values of the covariant edth/edthb of the degree-0 component i
    of every basis vector of the twisted space."""
    V = e_basis.bundle
    index = e_basis.index
    rows = index.block_rows(i, 0)
    s2 = index.spin2(i, 0)
    out_s2 = s2 + 2 if raise_spin else s2 - 2
    out = np.zeros((e_basis.dim, grid.n_theta, grid.n_phi), dtype=complex)
    lmax2 = int(np.max(index.l2[rows])) if len(rows) else 0
    if len(rows):
        table = harmonics.sylm_theta_table(out_s2, lmax2, grid)
        for r in rows:
            l2, m2 = int(index.l2[r]), int(index.m2[r])
            lam = (harmonics.lam2(l2, s2) if raise_spin
                   else -harmonics.lam2(l2, -s2))
            if lam == 0 or l2 > lmax2:
                continue
            coefs = e_basis.vectors[r, :]
            if not np.any(coefs):
                continue
            fld = (table[l2][(m2 + l2) // 2][:, None]
                   * harmonics.phi_phases(m2, grid)[None, :])
            out += (lam * coefs)[:, None, None] * fld[None, :, :]
    if V.potential is not None:
        for j in range(V.rank):
            blk = (V.potential.blocks.get((i, j)) if raise_spin
                   else V.potential.down_block(i, j, V.rank))
            if blk is None:
                continue
            out += blk.values(grid)[None, :, :] * e_basis.component_values(
                grid, j, 0)
    return out


def geometric_module(v: SectionOfV, V: BundleSpec, N: int,
                     e_basis: HilbertBasis | None = None,
                     grid: QuadratureGrid | None = None) -> QuantOperator:
    """Geometric quantization of a section of V.

    Implements the Poisson-directional-derivative definition: the image of
    a kernel element psi is v.psi + (1/N)[(edth_V v).(edthb_E psi) -
    (edthb_V v).(edth_E psi)], projected to H_N.
    """
    if e_basis is None:
        e_basis = bundles.e_space(V, N)
    up_v = _covariant_edth_section(v, True)
    dn_v = _covariant_edth_section(v, False)
    extra = max(f.bandlimit2 for f in up_v + dn_v) // 2 + 1
    if grid is None:
        grid = toeplitz_grid(N, v.bandlimit2 // 2 + e_basis.index.lmax2 // 2
                             + extra)
    fields = _section_deg0_values(v, e_basis, grid)
    for i in range(V.rank):
        dn_psi = _covariant_edth_basis_values(e_basis, i, False, grid)
        up_psi = _covariant_edth_basis_values(e_basis, i, True, grid)
        fields = fields + (up_v[i].values(grid)[None] * dn_psi
                           - dn_v[i].values(grid)[None] * up_psi) / N
    mat = _project_rows(N, grid, fields)
    return QuantOperator(mat, N, ("H", (0,), N), ("E", V.degrees, N),
                         "geometric")


def second_derivative_datum(v: SectionOfV,
                            grid: QuadratureGrid | None = None) -> float:
    """Sup norm of the contracted second covariant derivative edthb edth v,
    the coefficient of 1/N in the geometric-vs-Toeplitz difference."""
    up_v = _covariant_edth_section(v, True)
    V = v.bundle
    # lower each raised component covariantly
    lowered = []
    for i in range(V.rank):
        f = up_v[i]
        base = bundles.edthb_field(f)
        coeffs = dict(base.coeffs)
        if V.potential is not None:
            for j in range(V.rank):
                blk = V.potential.down_block(j, i, V.rank)
                if blk is None:
                    continue
                prod = _field_product(blk.scaled(-1.0), up_v[j])
                for k, c in prod.items():
                    coeffs[k] = coeffs.get(k, 0.0) + c
        lowered.append(SpinField(base.s2, coeffs))
    if grid is None:
        b = max(f.bandlimit2 for f in lowered)
        grid = grid_for_bandlimit(b + 8, b + 8)
    total = np.zeros((grid.n_theta, grid.n_phi))
    for f in lowered:
        total += np.abs(f.values(grid)) ** 2
    return float(np.sqrt(np.max(total)))


# ---------------------------------------------------------------------------
# Convergence diagnostics
# ---------------------------------------------------------------------------

def _scalar_bound(f: Symbol, N: int, other_sup: float) -> float:
    C = scalar_gap_constant()
    return math.sqrt(2.0) / math.sqrt(N - C) * geometry.gradient_sup_norm(f) \
        * other_sup


def multiplicativity_defect(f: Symbol, g: Symbol, N: int):
    """(defect, bound) for T(f)T(g) - T(fg)."""
    grid = toeplitz_grid(N, f.bandlimit + g.bandlimit)
    tf = toeplitz(f, N, grid)
    tg = toeplitz(g, N, grid)
    tfg = toeplitz_values(f.values(grid) * g.values(grid), N, grid)
    defect = operator_norm(tf.matrix @ tg.matrix - tfg)
    return defect, _scalar_bound(f, N, geometry.sup_norm(g))


def module_covariance_defect(f: Symbol, v: SectionOfV, V: BundleSpec, N: int,
                             e_basis: HilbertBasis | None = None):
    """(defect, bound) for T(f) T^V(v) - T^V(f v)."""
    if e_basis is None:
        e_basis = bundles.e_space(V, N)
    grid = toeplitz_grid(N, f.bandlimit + v.bandlimit2 // 2
                         + e_basis.index.lmax2 // 2)
    tf = toeplitz(f, N, grid)
    tv = toeplitz_module(v, V, N, e_basis, grid)
    fields = _section_deg0_values(v, e_basis, grid)
    fields = f.values(grid)[None] * fields
    tfv = _project_rows(N, grid, fields)
    defect = operator_norm(tf.matrix @ tv.matrix - tfv)
    return defect, _scalar_bound(f, N, v.sup_norm())


def commutator_projector_bound(f: Symbol, N: int,
                               lmax2: int | None = None):
    """(measured, bound) for the commutator of multiplication by f with
    the holomorphic projector, on the explicit truncated ambient space."""
    if lmax2 is None:
        lmax2 = N + 2 * f.bandlimit + 2
    V = bundles.trivial_bundle()
    index = bundles.basis_index(V, N, lmax2)
    rows = index.block_rows(0, 0)
    s2 = N
    sub = {int(r): k for k, r in enumerate(rows)}
    n = len(rows)
    mf = np.zeros((n, n), dtype=complex)
    for (l, m), c in f.coeffs.items():
        L2, M2 = 2 * l, 2 * m
        if c == 0:
            continue
        for r in rows:
            l2, m2 = int(index.l2[r]), int(index.m2[r])
            m2o = m2 + M2
            for l2o in range(max(s2, abs(l2 - L2)), min(lmax2, l2 + L2) + 1, 2):
                if abs(m2o) > l2o:
                    continue
                el = harmonics.pairing_element(s2, l2o, m2o, 0, L2, M2,
                                               s2, l2, m2)
                if el:
                    mf[sub[index.pos[(0, 0, l2o, m2o)]], sub[int(r)]] += c * el
    proj = np.zeros((n, n))
    for r in rows:
        if int(index.l2[r]) == N:
            proj[sub[int(r)], sub[int(r)]] = 1.0
    measured = operator_norm(mf @ proj - proj @ mf)
    bound = (math.sqrt(2.0) / math.sqrt(N - scalar_gap_constant())
             * geometry.gradient_sup_norm(f))
    return measured, bound


def norm_convergence(f: Symbol, Ns) -> list:
    """Rows (N, |T_N(f)|, gap to the sup norm)."""
    sup = geometry.sup_norm(f)
    rows = []
    for N in Ns:
        nrm = toeplitz(f, N).norm
        rows.append((N, nrm, abs(nrm - sup)))
    return rows


def gq_toeplitz_gap(f: Symbol, N: int):
    """(measured, bound) for |Q_N(f) - T_N(f)|; bound = sup|Lap f| / 2N."""
    grid = toeplitz_grid(N, f.bandlimit)
    q = geometric(f, N, grid=grid)
    t = toeplitz(f, N, grid)
    measured = operator_norm(q.matrix - t.matrix)
    bound = geometry.sup_norm(geometry.laplacian(f)) / (2.0 * N)
    return measured, bound


def normalized_trace(op: QuantOperator) -> complex:
    """Trace divided by the dimension of H_N."""
    m = op.matrix
    if m.shape[0] != m.shape[1]:
        raise ValueError("normalized trace needs a square operator")
    return complex(np.trace(m) / m.shape[0])


def trace_asymptotics(f: Symbol, Ns):
    """Fit tr T_N(f) to a degree-1 polynomial in N; compare the leading
    coefficient with integral(f)/2pi."""
    traces = [float(np.trace(toeplitz(f, N).matrix).real) for N in Ns]
    fit = np.polyfit(np.asarray(Ns, dtype=float), np.asarray(traces), 1)
    target = float(np.real(geometry.integrate(f))) / (2.0 * math.pi)
    return float(fit[0]), target, traces


def surjectivity_dimension(N: int) -> int:
    """Dimension of span{T_N(Y_lm) : l <= N}; full surjectivity = (N+1)^2."""
    grid = toeplitz_grid(N, N)
    mats = []
    for l in range(N + 1):
        for m in range(-l, l + 1):
            mats.append(toeplitz(geometry.ylm(l, m), N, grid).matrix.ravel())
    stack = np.stack(mats, axis=0)
    return int(np.linalg.matrix_rank(stack, tol=1e-9))
