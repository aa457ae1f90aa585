"""Quantized modules: rank growth, functoriality, comparators, idempotents.

Sign conventions are pinned by the trivial bundle: the rank polynomial of
V = O(p_1) + ... + O(p_r) is sum_i (N - p_i + 1), i.e. the holomorphic
section count of the dual-side twist, and the trivial line bundle gives
N + 1.  The standard rank-one idempotent over the sphere with the +n
orientation quantizes to modules of rank N + 2, matching degree -1
(docs/conventions.md has the dictionary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import bundles, dolbeault, geometry, quantization
from .bundles import BundleSpec, HilbertBasis, SectionOfV, pairing
from .geometry import Symbol
from .numerics import grid_for_bandlimit, operator_norm


@dataclass(frozen=True)
class RankPolynomial:
    """Degree-1 integer polynomial in N giving the asymptotic module rank."""

    c0: int
    c1: int
    chern_rank: int = 0
    chern_degree: int = 0

    def value(self, N: int) -> int:
        return self.c0 + self.c1 * N

    def __add__(self, other: "RankPolynomial") -> "RankPolynomial":
        return RankPolynomial(self.c0 + other.c0, self.c1 + other.c1,
                              self.chern_rank + other.chern_rank,
                              self.chern_degree + other.chern_degree)


def rank_polynomial(r: int, d: int) -> RankPolynomial:
    """Rank polynomial from Chern data (rank r, total degree d): rN + r - d."""
    return RankPolynomial(c0=r - d, c1=r, chern_rank=r, chern_degree=d)


def bundle_rank_polynomial(V: BundleSpec) -> RankPolynomial:
    return rank_polynomial(V.rank, V.total_degree)


@dataclass(frozen=True)
class K0Class:
    poly: RankPolynomial
    finite_corrections: dict = field(default_factory=dict)

    def to_jsonable(self):
        return {"poly": [self.poly.c0, self.poly.c1],
                "finite": {str(k): int(v)
                           for k, v in sorted(self.finite_corrections.items())}}


def k0_equal_mod_finite(a: K0Class, b: K0Class) -> bool:
    """Equality in the quotient by finitely-supported corrections."""
    return (a.poly.c0, a.poly.c1) == (b.poly.c0, b.poly.c1)


@dataclass(frozen=True)
class QuantizedModule:
    bundle: BundleSpec
    range_Ns: tuple
    per_N: dict                  # N -> (basis or None, rank)
    threshold: int               # N* beyond which rank matches the polynomial
    poly: RankPolynomial

    def rank(self, N: int) -> int:
        return self.per_N[N][1]


def rank_sequence(V: BundleSpec, Ns, keep_bases: bool = False,
                  lmax2: int | None = None) -> QuantizedModule:
    """Measured module ranks dim E_N^V per N, with the stability threshold."""
    poly = bundle_rank_polynomial(V)
    per_N = {}
    for N in Ns:
        basis = bundles.e_space(V, N, lmax2)
        per_N[N] = (basis if keep_bases else None, basis.dim)
    Ns = sorted(Ns)
    threshold = Ns[-1] + 1
    for k in range(len(Ns) - 1, -1, -1):
        if per_N[Ns[k]][1] != poly.value(Ns[k]):
            break
        threshold = Ns[k]
    return QuantizedModule(bundle=V, range_Ns=tuple(Ns), per_N=per_N,
                           threshold=threshold, poly=poly)


# ---------------------------------------------------------------------------
# Morphisms and the comparator
# ---------------------------------------------------------------------------

class NotCovariantlyConstantError(ValueError):
    """Block map couples summands of different degree."""


def morphism_pushforward(phi: np.ndarray, V: BundleSpec, W: BundleSpec,
                         N: int, lmax2: int | None = None) -> np.ndarray:
    """Matrix of the induced module map for a covariantly constant phi: V->W.

    phi is a (rank W, rank V) block-scalar matrix, nonzero only between
    equal-degree summands.  The returned matrix u has shape
    (dim E^V, dim E^W); a module element M in Hom(E^V, H_N) pushes forward
    to M @ u in Hom(E^W, H_N).
    """
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (W.rank, V.rank):
        raise ValueError("phi must be (rank W, rank V)")
    for j in range(W.rank):
        for i in range(V.rank):
            if phi[j, i] != 0 and W.degrees[j] != V.degrees[i]:
                raise NotCovariantlyConstantError(
                    f"block ({j},{i}) couples O({V.degrees[i]}) to "
                    f"O({W.degrees[j]})")
    if lmax2 is None:
        lmax2 = max(bundles.default_lmax2(V, N), bundles.default_lmax2(W, N))
    ev = bundles.e_space(V, N, lmax2)
    ew = bundles.e_space(W, N, lmax2)
    # dual map on twisted components: (phi^* psi)^V_i = sum_j phi[j,i] psi^W_j
    mapped = np.zeros((ev.index.dim, ew.dim), dtype=complex)
    for i in range(V.rank):
        for j in range(W.rank):
            if phi[j, i] == 0:
                continue
            rows_v = ev.index.block_rows(i, 0)
            rows_w = ew.index.block_rows(j, 0)
            # shared (l, m) enumeration: equal degrees give equal spins
            sel = {(int(ew.index.l2[r]), int(ew.index.m2[r])): r
                   for r in rows_w}
            for rv in rows_v:
                key = (int(ev.index.l2[rv]), int(ev.index.m2[rv]))
                if key in sel:
                    mapped[rv, :] += phi[j, i] * ew.vectors[sel[key], :]
            for d in (1,):
                rows_v1 = ev.index.block_rows(i, d)
                rows_w1 = ew.index.block_rows(j, d)
                sel1 = {(int(ew.index.l2[r]), int(ew.index.m2[r])): r
                        for r in rows_w1}
                for rv in rows_v1:
                    key = (int(ev.index.l2[rv]), int(ev.index.m2[rv]))
                    if key in sel1:
                        mapped[rv, :] += phi[j, i] * ew.vectors[sel1[key], :]
    return pairing(ev.vectors, mapped)


def apply_pushforward(op: quantization.QuantOperator,
                      u: np.ndarray) -> np.ndarray:
    return op.matrix @ u


@dataclass(frozen=True, eq=False)
class ComparatorResult:
    u: np.ndarray
    bijective: bool
    sigma_min: float
    projector_distance: float
    ev: HilbertBasis
    ew: HilbertBasis


def comparator(V: BundleSpec, W: BundleSpec, N: int,
               lmax2: int | None = None,
               margin: float = 0.1) -> ComparatorResult:
    """Fredholm comparator between quantizations of the same bundle with
    different connections: the kernel projector of V applied to the kernel
    basis of W, in E^V coordinates."""
    if V.degrees != W.degrees:
        raise ValueError("V and W must share degrees")
    if lmax2 is None:
        lmax2 = max(bundles.default_lmax2(V, N), bundles.default_lmax2(W, N))
    DV = dolbeault.build_dolbeault(V, N, lmax2)
    DW = dolbeault.build_dolbeault(W, N, lmax2)
    PV = dolbeault.kernel_projector(DV)
    PW = dolbeault.kernel_projector(DW)
    ev = bundles.e_space(V, N, lmax2)
    ew = bundles.e_space(W, N, lmax2)
    image = PV.matrix @ ew.vectors
    u = pairing(ev.vectors, image)
    if u.size:
        smin = float(np.linalg.svd(u, compute_uv=False)[-1])
    else:
        smin = 0.0
    dist = float(np.linalg.norm(PV.matrix - PW.matrix, 2))
    return ComparatorResult(u=u, bijective=bool(smin > margin),
                            sigma_min=smin, projector_distance=dist,
                            ev=ev, ew=ew)


def comparator_residual(V: BundleSpec, W: BundleSpec, N: int,
                        v: SectionOfV, res: ComparatorResult) -> float:
    """Norm of u(T^V(v)) - T^W(v), the intertwining defect."""
    vV = SectionOfV(V, v.components)
    vW = SectionOfV(W, v.components)
    tv = quantization.toeplitz_module(vV, V, N, res.ev)
    tw = quantization.toeplitz_module(vW, W, N, res.ew)
    return operator_norm(tv.matrix @ res.u - tw.matrix)


# ---------------------------------------------------------------------------
# Idempotent lifting
# ---------------------------------------------------------------------------

class IdempotentGapError(RuntimeError):
    """Spectrum of the compressed idempotent too close to 1/2."""


@dataclass(frozen=True)
class LiftedIdempotent:
    symbol: list                    # m x m nested list of Symbols
    per_N: dict                     # N -> idempotent matrix over A_N
    defects: dict                   # N -> |T_N(e) - lift|
    idempotency: dict               # N -> |lift^2 - lift|
    gaps: dict                      # N -> min |eig - 1/2|

    def trace(self, N: int) -> float:
        return float(np.trace(self.per_N[N]).real)


def _symbol_matrix_values(e, grid):
    m = len(e)
    vals = np.zeros((grid.n_theta, grid.n_phi, m, m), dtype=complex)
    for i in range(m):
        for j in range(m):
            vals[:, :, i, j] = e[i][j].values(grid)
    return vals


def lift_idempotent(e, Ns, gap_tol: float = 1e-3,
                    pointwise_tol: float = 1e-10) -> LiftedIdempotent:
    """Exact idempotents over the matrix algebras from an idempotent symbol.

    e is an m x m nested list of Symbols with e(x)^2 = e(x) pointwise.
    Per N the compression a = [T_N(e_ij)] is split by the spectral
    projection onto eigenvalues with real part above 1/2.
    """
    m = len(e)
    bl = max(col.bandlimit for row in e for col in row)
    grid = grid_for_bandlimit(4 * bl + 8, 4 * bl + 8)
    vals = _symbol_matrix_values(e, grid)
    sq = np.einsum("tpij,tpjk->tpik", vals, vals)
    if float(np.max(np.abs(sq - vals))) > pointwise_tol:
        raise ValueError("symbol is not pointwise idempotent")
    hermitian = float(np.max(np.abs(vals - np.conj(np.transpose(
        vals, (0, 1, 3, 2)))))) < 1e-12

    per_N, defects, idem, gaps = {}, {}, {}, {}
    for N in Ns:
        tgrid = quantization.toeplitz_grid(N, bl)
        blocks = [[quantization.toeplitz(e[i][j], N, tgrid).matrix
                   for j in range(m)] for i in range(m)]
        a = np.block(blocks)
        if hermitian:
            vals_a, vecs = np.linalg.eigh(a)
            gap = float(np.min(np.abs(vals_a - 0.5)))
            if gap < gap_tol:
                raise IdempotentGapError(
                    f"N={N}: eigenvalue within {gap:.2e} of 1/2")
            cols = vecs[:, vals_a > 0.5]
            lift = cols @ np.conj(cols.T)
        else:
            T, Z, sdim = scipy.linalg.schur(a, output="complex",
                                            sort=lambda z: z.real > 0.5)
            gap = float(np.min(np.abs(np.diag(T).real - 0.5)))
            if gap < gap_tol:
                raise IdempotentGapError(
                    f"N={N}: eigenvalue within {gap:.2e} of 1/2")
            if sdim == 0:
                lift = np.zeros_like(a)
            else:
                T11, T12, T22 = T[:sdim, :sdim], T[:sdim, sdim:], T[sdim:,
                                                                    sdim:]
                if T12.size:
                    X = scipy.linalg.solve_sylvester(T11, -T22, T12)
                    top = np.hstack([np.eye(sdim), X])
                else:
                    top = np.eye(sdim)
                lift = Z[:, :sdim] @ top @ np.conj(Z.T)
        per_N[N] = lift
        defects[N] = operator_norm(a - lift)
        idem[N] = operator_norm(lift @ lift - lift)
        gaps[N] = gap
    return LiftedIdempotent(symbol=e, per_N=per_N, defects=defects,
                            idempotency=idem, gaps=gaps)


def symbol_chern_data(e, grid=None):
    """(rank, degree) of the subbundle cut out by the idempotent symbol.

    rank is the pointwise trace; the degree is the Chern-Weil integral
    (1/2pi) integral of tr(e [edthb e, edth e]) against the volume form.
    """
    m = len(e)
    bl = max(col.bandlimit for row in e for col in row)
    if grid is None:
        grid = grid_for_bandlimit(6 * bl + 8, 6 * bl + 8)
    vals = _symbol_matrix_values(e, grid)
    rank = float(np.mean(np.einsum("tpii->tp", vals).real))
    up = np.zeros_like(vals)
    dn = np.zeros_like(vals)
    for i in range(m):
        for j in range(m):
            up[:, :, i, j] = quantization.harmonics.synthesize(
                2, geometry._edth_coeffs(e[i][j], True), grid)
            dn[:, :, i, j] = quantization.harmonics.synthesize(
                -2, geometry._edth_coeffs(e[i][j], False), grid)
    comm = (np.einsum("tpij,tpjk->tpik", up, dn)
            - np.einsum("tpij,tpjk->tpik", dn, up))
    dens = np.einsum("tpij,tpji->tp", vals, comm)
    degree = grid.integrate(dens) / (2.0 * math.pi)
    return int(round(rank)), int(round(float(degree.real)))


def idempotent_trace_check(e, Ns, lift: LiftedIdempotent | None = None):
    """Rows (N, trace of the lift, polynomial value) plus the threshold N*."""
    if lift is None:
        lift = lift_idempotent(e, Ns)
    r, d = symbol_chern_data(e)
    poly = rank_polynomial(r, d)
    rows = []
    for N in sorted(Ns):
        rows.append((N, lift.trace(N), poly.value(N)))
    threshold = max(Ns) + 1
    for N, tr, pv in reversed(rows):
        if round(tr) != pv or abs(tr - round(tr)) > 1e-8:
            break
        threshold = N
    return rows, threshold, poly


def bott_projector(orientation: int = +1):
    """The rank-1 idempotent (1 + orientation * n.sigma)/2 over the sphere.

    With orientation +1 the subbundle has Chern degree +1 here, so the
    lift has rank N; with -1 the rank is N + 2.
    """
    s = float(orientation)
    half = math.sqrt(math.pi)          # constant 1/2 in Y_00 coefficients
    cz = math.sqrt(math.pi / 3.0)      # (1/2) cos(theta)
    cpm = math.sqrt(2.0 * math.pi / 3.0)
    e11 = Symbol({(0, 0): half, (1, 0): s * cz})
    e22 = Symbol({(0, 0): half, (1, 0): -s * cz})
    e12 = Symbol({(1, -1): s * cpm})
    e21 = Symbol({(1, 1): -s * cpm})
    return [[e11, e12], [e21, e22]]


def spinor_rank_gap(Ns):
    """Rows (N, rk S+_N, rk S-_N, gap, kernel bound 2(N+1)).

    S+ = O(-1) and S- = O(+1) (the positive/negative twisted-form halves),
    so the gap equals the Euler characteristic +2 for every N.
    """
    plus = bundle_rank_polynomial(bundles.line_bundle(-1))
    minus = bundle_rank_polynomial(bundles.line_bundle(+1))
    rows = []
    for N in sorted(Ns):
        rp, rm = plus.value(N), minus.value(N)
        rows.append((N, rp, rm, rp - rm, 2 * (N + 1)))
    return rows
