"""Twisted Dirac (Dolbeault-type) operators on degree-0 + degree-1 forms.

The round part acts per (summand, l, m) multiplet through the exact ladder
coefficients, so it is assembled without discretization error; only
potentials couple multiplets, through exact 3j triple integrals.  In the
matrix convention used here the operator is

    D = [[0, -(edthb + b.)], [(edth + a.), 0]]

acting on (degree-0, degree-1) component columns, which is unitarily
equivalent to i gamma^mu nabla_mu for the corresponding connection
(docs/conventions.md).  Exact round spectrum on a paired multiplet l of
the summand O(p): (l - s)(l + s + 1) with s = (N - p)/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import harmonics
from .bundles import (BasisIndex, BundleSpec, HilbertBasis, basis_index,
                      default_lmax2, grid_for_bandlimit)


class KernelGapError(RuntimeError):
    """Spectral gap around the kernel threshold is too small to trust."""


@dataclass(frozen=True, eq=False)
class DolbeaultOperator:
    """Assembled Galerkin matrix of the twisted operator."""

    bundle: BundleSpec
    N: int
    lmax2: int
    index: BasisIndex
    matrix: np.ndarray
    potential_part: np.ndarray
    self_adjoint: bool
    warnings: tuple = ()

    @property
    def dim(self) -> int:
        return self.index.dim

    @property
    def grading(self) -> np.ndarray:
        """Degree (0 or 1) of each basis vector."""
        return self.index.degree

    @property
    def block01(self) -> np.ndarray:
        """Degree-0 -> degree-1 block of D."""
        r1 = np.where(self.index.degree == 1)[0]
        r0 = np.where(self.index.degree == 0)[0]
        return self.matrix[np.ix_(r1, r0)]


def _add_multiplication_block(mat, index: BasisIndex, field, i_out: int,
                              d_out: int, j_in: int, d_in: int, sign: float):
    """Add sign * (multiplication by `field`) between two degree blocks."""
    s2_in = index.spin2(j_in, d_in)
    s2_out = index.spin2(i_out, d_out)
    lmax2 = index.lmax2
    for (L2, M2), c in field.coeffs.items():
        if c == 0:
            continue
        # m-independent 3j is hoisted inside pairing_element's cache
        for l2 in range(abs(s2_in), lmax2 + 1, 2):
            lo = max(abs(s2_out), abs(l2 - L2))
            hi = min(lmax2, l2 + L2)
            for l2o in range(lo, hi + 1, 2):
                for m2 in range(-l2, l2 + 1, 2):
                    m2o = m2 + M2
                    if abs(m2o) > l2o:
                        continue
                    el = harmonics.pairing_element(
                        s2_out, l2o, m2o, field.s2, L2, M2, s2_in, l2, m2)
                    if el:
                        row = index.pos[(i_out, d_out, l2o, m2o)]
                        col = index.pos[(j_in, d_in, l2, m2)]
                        mat[row, col] += sign * c * el


def build_dolbeault(V: BundleSpec, N: int, lmax2: int | None = None,
                    margin: int = 3) -> DolbeaultOperator:
    """Assemble the twisted operator for (V, N) at basis cutoff lmax.

    An undersized cutoff attaches a warning rather than failing.
    """
    warnings = []
    recommended = default_lmax2(V, N, margin)
    if lmax2 is None:
        lmax2 = recommended
    elif lmax2 < recommended:
        warnings.append(f"lmax2={lmax2} below recommended {recommended}")
    index = basis_index(V, N, lmax2)
    mat = np.zeros((index.dim, index.dim), dtype=complex)

    for i, p in enumerate(V.degrees):
        s2 = N - p
        for l2 in range(max(abs(s2), abs(s2 + 2)), lmax2 + 1, 2):
            kappa = harmonics.lam2(l2, s2)
            for m2 in range(-l2, l2 + 1, 2):
                up = index.pos[(i, 1, l2, m2)]
                dn = index.pos[(i, 0, l2, m2)]
                mat[up, dn] += kappa     # edth
                mat[dn, up] += kappa     # -edthb

    pot = np.zeros_like(mat)
    if V.potential is not None:
        for (i, j), a in V.potential.blocks.items():
            _add_multiplication_block(pot, index, a, i, 1, j, 0, +1.0)
            b = V.potential.down_block(j, i, V.rank)
            if b is not None:
                _add_multiplication_block(pot, index, b, j, 0, i, 1, -1.0)
    mat += pot

    self_adjoint = V.potential is None or V.potential.kind == "compatible"
    return DolbeaultOperator(bundle=V, N=N, lmax2=lmax2, index=index,
                             matrix=mat, potential_part=pot,
                             self_adjoint=self_adjoint,
                             warnings=tuple(warnings))


def round_d2_spectrum(V: BundleSpec, N: int, lmax2: int) -> np.ndarray:
    """Closed-form D^2 spectrum of the round (potential-free) operator."""
    vals = []
    for p in V.degrees:
        s2 = N - p
        for d in (0, 1):
            sd2 = s2 + 2 * d
            for l2 in range(abs(sd2), lmax2 + 1, 2):
                kappa = harmonics.lam2(l2, s2)
                vals.extend([kappa ** 2] * (l2 + 1))
    return np.sort(np.array(vals))


def spectrum_d2(D: DolbeaultOperator) -> np.ndarray:
    """Eigenvalues of D^2, ascending.

    Self-adjoint case: squared eigenvalues of D.  General case: real parts
    of the eigenvalues of the (non-normal) square.
    """
    if D.self_adjoint:
        vals = np.linalg.eigvalsh(D.matrix)
        return np.sort(vals ** 2)
    sq = D.matrix @ D.matrix
    return np.sort(np.linalg.eigvals(sq).real)


def curvature_endomorphism(V: BundleSpec, grid=None) -> np.ndarray:
    """Pointwise curvature density F(x) of the dual-side connection,
    normalized so the round O(p) summand contributes the constant p.

    Shape (n_theta, n_phi, r, r).  For compatible potentials the matrix is
    Hermitian at every point.
    """
    from .bundles import SpinField, edth_field, edthb_field

    pot = V.potential
    bl2 = pot.bandlimit2 if pot is not None else 0
    if grid is None:
        grid = grid_for_bandlimit(2 * bl2 + 8, 2 * bl2 + 8)
    r = V.rank
    F = np.zeros((grid.n_theta, grid.n_phi, r, r), dtype=complex)
    for i in range(r):
        F[:, :, i, i] = V.degrees[i]
    if pot is None or not pot.blocks:
        return F
    a_vals = np.zeros((r, r, grid.n_theta, grid.n_phi), dtype=complex)
    b_vals = np.zeros_like(a_vals)
    for (i, j), a in pot.blocks.items():
        F[:, :, i, j] += edthb_field(a).values(grid)
        a_vals[i, j] = a.values(grid)
    for i in range(r):
        for j in range(r):
            b = pot.down_block(i, j, r)
            if b is not None:
                F[:, :, i, j] -= edth_field(b).values(grid)
                b_vals[i, j] = b.values(grid)
    # commutator term b a - a b, pointwise
    ba = np.einsum("ikxy,kjxy->xyij", b_vals, a_vals)
    ab = np.einsum("ikxy,kjxy->xyij", a_vals, b_vals)
    return F + ba - ab


def weitzenbock_constant(V: BundleSpec, grid=None) -> float:
    """Curvature constant C with spec(D^2) in {0} union [N - C, inf).

    The odd-degree curvature term of D^2 is (2 - F(x)) relative to the
    grading term, so C = sup_x lambda_max(F(x)) - 2.  For the trivial
    bundle this gives C = -2 < 1.  Potentials of kind "hermitian" do not
    enter (they belong to the bounded i*B part, handled separately).
    """
    if V.potential is not None and V.potential.kind == "hermitian":
        return float(max(V.degrees) - 2)
    F = curvature_endomorphism(V, grid)
    if V.rank == 1:
        top = float(np.max(F[:, :, 0, 0].real))
    else:
        top = float(np.max(np.linalg.eigvalsh(F)))
    return top - 2.0


def potential_dirac_norm(V: BundleSpec, grid=None) -> float:
    """Sup over the sphere of the pointwise norm of the potential's
    Dirac-multiplication term (the bounded perturbation A, or B for the
    hermitian kind)."""
    if V.potential is None:
        return 0.0
    return V.potential.sup_norm(V.degrees, grid)


@dataclass(frozen=True, eq=False)
class SpectralProjector:
    """Idempotent onto the kernel group of eigenvalues."""

    matrix: np.ndarray
    rank: int
    orthogonal: bool
    target: str = "kernel"
    gap: tuple = (0.0, 0.0)   # (largest |lambda| inside, smallest outside)
    threshold: float = 0.0

    @property
    def idempotency_defect(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m @ m - m, 2))


def kernel_projector(D: DolbeaultOperator,
                     threshold: float | None = None) -> SpectralProjector:
    """Spectral projector of D at eigenvalue 0.

    Eigenvalues of D^2 below `threshold` (default N/2) form the kernel
    group.  Orthogonal in the self-adjoint case; otherwise the Riesz
    projector onto the invariant subspace inside the contour of radius
    (1/2) sqrt(N - C).
    """
    scale = max(1.0, float(np.linalg.norm(D.matrix, 2)))
    accuracy = 1e-9 * scale ** 2
    if D.self_adjoint:
        if threshold is None:
            threshold = D.N / 2.0
        vals, vecs = np.linalg.eigh(D.matrix)
        d2 = vals ** 2
        inside = d2 < threshold
        below = float(np.max(d2[inside])) if np.any(inside) else 0.0
        above = float(np.min(d2[~inside])) if np.any(~inside) else np.inf
        if min(threshold - below, above - threshold) < 10 * accuracy:
            raise KernelGapError(
                f"eigenvalues of D^2 near threshold {threshold}: "
                f"below={below}, above={above}")
        cols = vecs[:, inside]
        mat = cols @ np.conj(cols.T)
        return SpectralProjector(matrix=mat, rank=int(np.sum(inside)),
                                 orthogonal=True, gap=(below, above),
                                 threshold=threshold)

    C = weitzenbock_constant(D.bundle)
    if threshold is not None:
        rho = math.sqrt(threshold)
    else:
        rho = 0.5 * math.sqrt(max(D.N - C, 1.0))
    T, Z, sdim = scipy.linalg.schur(D.matrix, output="complex",
                                    sort=lambda z: abs(z) < rho)
    eigs = np.abs(np.diag(T))
    below = float(np.max(eigs[:sdim])) if sdim else 0.0
    above = float(np.min(eigs[sdim:])) if sdim < len(eigs) else np.inf
    if min(rho - below, above - rho) < 10 * math.sqrt(accuracy):
        raise KernelGapError(
            f"|eigenvalues| of D near contour radius {rho}: "
            f"below={below}, above={above}")
    if sdim == 0:
        mat = np.zeros_like(D.matrix)
    else:
        T11, T12, T22 = T[:sdim, :sdim], T[:sdim, sdim:], T[sdim:, sdim:]
        if T12.size:
            X = scipy.linalg.solve_sylvester(T11, -T22, T12)
            top = np.hstack([np.eye(sdim), X])
        else:
            top = np.eye(sdim)
        mat = Z[:, :sdim] @ top @ np.conj(Z.T)
    return SpectralProjector(matrix=mat, rank=sdim, orthogonal=False,
                             gap=(below, above), threshold=rho ** 2)


def kernel_basis(D: DolbeaultOperator,
                 proj: SpectralProjector | None = None) -> HilbertBasis:
    """Orthonormal basis of the kernel group subspace, with degree split."""
    if proj is None:
        proj = kernel_projector(D)
    if D.self_adjoint:
        vals, vecs = np.linalg.eigh(D.matrix)
        inside = vals ** 2 < proj.threshold
        cols = vecs[:, inside]
    else:
        T, Z, sdim = scipy.linalg.schur(
            D.matrix, output="complex",
            sort=lambda z: abs(z) < math.sqrt(proj.threshold))
        cols = Z[:, :sdim]
    vectors = math.sqrt(2.0) * cols
    r0 = np.where(D.index.degree == 0)[0]
    r1 = np.where(D.index.degree == 1)[0]
    dims = []
    for rows in (r0, r1):
        block = vectors[rows, :]
        dims.append(int(np.linalg.matrix_rank(block, tol=1e-7)) if block.size
                    else 0)
    return HilbertBasis(kind="E", bundle=D.bundle, N=D.N, index=D.index,
                        vectors=vectors, orthonormal=True,
                        gram=np.eye(vectors.shape[1]),
                        degree_dims=tuple(dims), warnings=D.warnings)


def kernel_degree_split(D: DolbeaultOperator):
    """Per-degree kernel dimensions and the minimum degree-0 component norm
    over kernel unit vectors.  Returns (dims_by_degree, dim_odd, min_psi0,
    in_regime)."""
    basis = kernel_basis(D)
    r0 = np.where(D.index.degree == 0)[0]
    b0 = math.sqrt(0.5) * basis.vectors[r0, :]
    if basis.dim == 0:
        min_psi0 = 0.0
    else:
        # basis is orthonormal in the volume-form inner product, so the
        # smallest singular value of the normalized degree-0 block is the
        # minimum over kernel unit vectors of |psi_0|
        gram = np.conj(basis.vectors.T) @ basis.vectors * 0.5
        chol = np.linalg.cholesky(gram)
        sv = np.linalg.svd(b0 @ np.linalg.inv(np.conj(chol.T)),
                           compute_uv=False)
        min_psi0 = float(sv[-1]) if sv.size else 0.0
    C = weitzenbock_constant(D.bundle)
    bnorm = (potential_dirac_norm(D.bundle)
             if not D.self_adjoint else 0.0)
    in_regime = D.N > C + bnorm ** 2
    return basis.degree_dims, basis.degree_dims[1], min_psi0, in_regime


@dataclass(frozen=True)
class ProjectorDrift:
    measured: float
    bound: float            # contour estimate as printed in the source text
    corrected_bound: float  # derivation-faithful contour estimate
    applicable: bool
    a_norm: float
    c_const: float


def projector_distance(V: BundleSpec, W: BundleSpec, N: int,
                       lmax2: int | None = None) -> ProjectorDrift:
    """Operator-norm distance of the two kernel projectors, with the
    contour-integral bound evaluated from the measured potential norm.

    V and W must share the degrees list; W is the self-adjoint reference.
    """
    if V.degrees != W.degrees:
        raise ValueError("V and W must have the same degrees")
    if lmax2 is None:
        lmax2 = max(default_lmax2(V, N), default_lmax2(W, N))
    DV = build_dolbeault(V, N, lmax2)
    DW = build_dolbeault(W, N, lmax2)
    if not DW.self_adjoint:
        raise ValueError("reference W must be self-adjoint")
    PV = kernel_projector(DV)
    PW = kernel_projector(DW)
    measured = float(np.linalg.norm(PV.matrix - PW.matrix, 2))

    diff = DV.potential_part - DW.potential_part
    a_norm = float(np.linalg.norm(diff, 2))
    # pointwise sup-norm of the potential difference where available
    if W.potential is None and V.potential is not None:
        a_norm = potential_dirac_norm(V)
    C = weitzenbock_constant(W)
    radius = 0.5 * math.sqrt(max(N - C, 0.0))
    applicable = N > C + 4 * a_norm ** 2
    if applicable and radius > a_norm:
        bound = 2 * a_norm / math.sqrt(N - C) / (radius - a_norm)
        corrected = a_norm / (radius - a_norm)
    else:
        bound = corrected = math.inf
        applicable = False
    return ProjectorDrift(measured=measured, bound=bound,
                          corrected_bound=corrected, applicable=applicable,
                          a_norm=a_norm, c_const=C)
