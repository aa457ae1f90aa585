"""Direct sums of line bundles O(p) over CP^1, connections, and bases.

Sections of O(p) are spin-weight p/2 fields; the twisted space carries
per-summand weights (N - p_i)/2 in degree 0 and (N - p_i)/2 + 1 in degree 1.
Doubled-integer spin labels (suffix 2) are used throughout so odd degrees
need no special casing.  The ambient inner product is always the integral
of the fiber pairing against the volume form, i.e. half the coefficient
dot product in the unit-normalized monopole-harmonic basis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import harmonics
from .numerics import QuadratureGrid, grid_for_bandlimit

AMBIENT_GRAM = 0.5  # <u, v> = AMBIENT_GRAM * (u^dagger v) on coefficients


@dataclass(frozen=True, eq=False)
class SpinField:
    """Band-limited spin-weighted field, sum of c * sYlm terms.

    s2 is the doubled spin weight; coeffs maps (l2, m2) -> complex.
    """

    s2: int
    coeffs: dict

    @property
    def bandlimit2(self) -> int:
        return max((l2 for (l2, _) in self.coeffs), default=abs(self.s2))

    def values(self, grid: QuadratureGrid) -> np.ndarray:
        return harmonics.synthesize(self.s2, self.coeffs, grid)

    def conj(self) -> "SpinField":
        out = {}
        for (l2, m2), c in self.coeffs.items():
            out[(l2, -m2)] = harmonics.conj_sign(self.s2, m2) * np.conj(c)
        return SpinField(-self.s2, out)

    def scaled(self, t) -> "SpinField":
        return SpinField(self.s2, {k: t * c for k, c in self.coeffs.items()})


def edth_field(f: SpinField) -> SpinField:
    """Unit-sphere raising edth applied coefficient-wise."""
    out = {}
    for (l2, m2), c in f.coeffs.items():
        lam = harmonics.lam2(l2, f.s2)
        if lam:
            out[(l2, m2)] = lam * c
    return SpinField(f.s2 + 2, out)


def edthb_field(f: SpinField) -> SpinField:
    """Unit-sphere lowering edth-bar applied coefficient-wise."""
    out = {}
    for (l2, m2), c in f.coeffs.items():
        lam = harmonics.lam2(l2, -f.s2)
        if lam:
            out[(l2, m2)] = -lam * c
    return SpinField(f.s2 - 2, out)


@dataclass(frozen=True)
class Potential:
    """Bounded connection potential, stored on the twisted (dual) side.

    blocks maps (i, j) -> SpinField of spin weight 1 + (p_j - p_i)/2: the
    coefficient field by which degree-0 component j multiplies into
    degree-1 component i.  kind selects how the potential enters the
    operator:

      "compatible"  connection compatible with the inner product;
                    the twisted Dirac operator stays self-adjoint.
      "hermitian"   self-adjoint potential i*B as in the incompatible
                    case; the operator becomes D0 + i*B.
    """

    kind: str
    blocks: dict

    def __post_init__(self):
        if self.kind not in ("compatible", "hermitian"):
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @property
    def bandlimit2(self) -> int:
        return max((f.bandlimit2 for f in self.blocks.values()), default=0)

    def down_block(self, i: int, j: int, rank: int) -> SpinField | None:
        """Degree-1 -> degree-0 coefficient field b_ij (see conventions)."""
        up = self.blocks.get((j, i))
        if up is None:
            return None
        sign = -1.0 if self.kind == "compatible" else 1.0
        return up.conj().scaled(sign)

    def sup_norm(self, degrees, grid: QuadratureGrid | None = None) -> float:
        """Sup over the sphere of the pointwise singular-value norm."""
        if not self.blocks:
            return 0.0
        if grid is None:
            b = self.bandlimit2
            grid = grid_for_bandlimit(2 * b + 8, 2 * b + 8)
        r = len(degrees)
        vals = np.zeros((r, r, grid.n_theta, grid.n_phi), dtype=complex)
        for (i, j), f in self.blocks.items():
            vals[i, j] = f.values(grid)
        stack = np.transpose(vals, (2, 3, 0, 1)).reshape(-1, r, r)
        return float(np.max(np.linalg.norm(stack, ord=2, axis=(1, 2))))

    def to_jsonable(self):
        rows = [[i, j, l2, m2, float(np.real(c)), float(np.imag(c))]
                for (i, j), f in sorted(self.blocks.items())
                for (l2, m2), c in sorted(f.coeffs.items())]
        return {"kind": self.kind, "blocks": rows}


@dataclass(frozen=True)
class BundleSpec:
    """V = O(p_1) + ... + O(p_r) with an optional connection potential."""

    degrees: tuple
    potential: Potential | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(p) for p in self.degrees))
        if not self.degrees:
            raise ValueError("bundle needs at least one summand")
        if self.potential is not None:
            for (i, j), f in self.potential.blocks.items():
                want = 2 + self.degrees[j] - self.degrees[i]
                if f.s2 != want:
                    raise ValueError(
                        f"potential block {(i, j)} has spin {f.s2}/2, "
                        f"expected {want}/2")

    @property
    def rank(self) -> int:
        return len(self.degrees)

    @property
    def total_degree(self) -> int:
        return sum(self.degrees)

    def to_json(self) -> str:
        pot = None if self.potential is None else self.potential.to_jsonable()
        return json.dumps({"degrees": list(self.degrees), "potential": pot,
                           "label": self.label})

    @staticmethod
    def from_json(text: str) -> "BundleSpec":
        data = json.loads(text)
        pot = None
        if data.get("potential"):
            blocks: dict = {}
            degrees = data["degrees"]
            coef: dict = {}
            for i, j, l2, m2, re, im in data["potential"]["blocks"]:
                coef.setdefault((i, j), {})[(l2, m2)] = complex(re, im)
            blocks = {(i, j): SpinField(2 + degrees[j] - degrees[i], c)
                      for (i, j), c in coef.items()}
            pot = Potential(data["potential"]["kind"], blocks)
        return BundleSpec(tuple(data["degrees"]), pot, data.get("label", ""))


def trivial_bundle() -> BundleSpec:
    return BundleSpec((0,), None, "O(0)")


def line_bundle(p: int, potential: Potential | None = None) -> BundleSpec:
    return BundleSpec((p,), potential, f"O({p})")


def zonal_potential(V: BundleSpec, scale: float,
                    kind: str = "compatible") -> Potential:
    """Axially symmetric diagonal potential with sup norm `scale`."""
    blocks = {}
    for i in range(V.rank):
        s2 = 2
        blocks[(i, i)] = SpinField(s2, {(2, 0): 1.0 + 0j})
    pot = Potential(kind, blocks)
    measured = pot.sup_norm(V.degrees)
    blocks = {k: f.scaled(scale / measured) for k, f in blocks.items()}
    return Potential(kind, blocks)


def random_potential(V: BundleSpec, lmax: int, scale: float,
                     rng: np.random.Generator,
                     kind: str = "compatible") -> Potential:
    """Seeded band-limited potential with sup norm equal to `scale`."""
    blocks = {}
    for i in range(V.rank):
        for j in range(V.rank):
            s2 = 2 + V.degrees[j] - V.degrees[i]
            coeffs = {}
            for l2 in range(abs(s2), 2 * lmax + 1, 2):
                for m2 in range(-l2, l2 + 1, 2):
                    c = rng.standard_normal() + 1j * rng.standard_normal()
                    coeffs[(l2, m2)] = c
            if coeffs:
                blocks[(i, j)] = SpinField(s2, coeffs)
    pot = Potential(kind, blocks)
    measured = pot.sup_norm(V.degrees)
    if measured > 0:
        blocks = {k: f.scaled(scale / measured) for k, f in blocks.items()}
    return Potential(kind, blocks)


# ---------------------------------------------------------------------------
# Ambient index and bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BasisIndex:
    """Enumeration of the truncated monopole-harmonic basis of the
    degree-0 + degree-1 twisted form space for (V, N, lmax)."""

    degrees: tuple
    N: int
    lmax2: int
    summand: np.ndarray   # (dim,)
    degree: np.ndarray    # (dim,) 0 or 1
    l2: np.ndarray        # (dim,)
    m2: np.ndarray        # (dim,)
    pos: dict             # (i, d, l2, m2) -> row

    def spin2(self, i: int, d: int) -> int:
        return self.N - self.degrees[i] + 2 * d

    @property
    def dim(self) -> int:
        return len(self.summand)

    def block_rows(self, i: int, d: int) -> np.ndarray:
        return np.where((self.summand == i) & (self.degree == d))[0]


def basis_index(V: BundleSpec, N: int, lmax2: int) -> BasisIndex:
    rows = []
    for i in range(V.rank):
        for d in (0, 1):
            s2 = N - V.degrees[i] + 2 * d
            for l2 in range(abs(s2), lmax2 + 1, 2):
                for m2 in range(-l2, l2 + 1, 2):
                    rows.append((i, d, l2, m2))
    summand = np.array([r[0] for r in rows])
    degree = np.array([r[1] for r in rows])
    l2 = np.array([r[2] for r in rows])
    m2 = np.array([r[3] for r in rows])
    pos = {r: k for k, r in enumerate(rows)}
    return BasisIndex(V.degrees, N, lmax2, summand, degree, l2, m2, pos)


def default_lmax2(V: BundleSpec, N: int, margin: int = 3) -> int:
    """Heuristic cutoff: highest kernel multiplet + potential band + margin."""
    base = max(max(abs(N - p), abs(N - p + 2)) for p in V.degrees)
    pot = V.potential.bandlimit2 if V.potential is not None else 0
    return base + pot + 2 * margin


@dataclass(frozen=True, eq=False)
class HilbertBasis:
    """Basis of a space of sections/forms, as coefficient columns.

    vectors is (ambient_dim, nvec); orthonormal means
    AMBIENT_GRAM * vectors^dagger vectors = identity.
    """

    kind: str                 # "H" or "E"
    bundle: BundleSpec
    N: int
    index: BasisIndex
    vectors: np.ndarray
    orthonormal: bool
    gram: np.ndarray
    degree_dims: tuple
    warnings: tuple = ()

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def space_tag(self):
        return (self.kind, self.bundle.degrees, self.N)

    @property
    def gram_condition(self) -> float:
        return float(np.linalg.cond(self.gram)) if self.dim else 1.0

    def component_values(self, grid: QuadratureGrid, i: int,
                         d: int = 0) -> np.ndarray:
        """Values of each basis vector's (summand i, degree d) component,
        shape (nvec, n_theta, n_phi)."""
        rows = self.index.block_rows(i, d)
        s2 = self.index.spin2(i, d)
        out = np.zeros((self.dim, grid.n_theta, grid.n_phi), dtype=complex)
        if len(rows) == 0:
            return out
        table = harmonics.sylm_theta_table(s2, int(np.max(self.index.l2[rows])),
                                           grid)
        coefs = self.vectors[rows, :]
        nonzero = np.where(np.any(coefs != 0, axis=1))[0]
        for k in nonzero:
            r = rows[k]
            l2, m2 = int(self.index.l2[r]), int(self.index.m2[r])
            fld = (table[l2][(m2 + l2) // 2][:, None]
                   * harmonics.phi_phases(m2, grid)[None, :])
            out += coefs[k][:, None, None] * fld[None, :, :]
        return out


def pairing(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Volume-form inner product on coefficient columns."""
    return AMBIENT_GRAM * (np.conj(u.T) @ v)


def closed_form_e_space(V: BundleSpec, N: int,
                        lmax2: int | None = None) -> HilbertBasis:
    """Holomorphic sections of O(N - p_i) per summand (degree 0 only)."""
    if lmax2 is None:
        lmax2 = default_lmax2(V, N, margin=0)
    index = basis_index(V, N, lmax2)
    cols = []
    for i, p in enumerate(V.degrees):
        k2 = N - p
        if k2 < 0:
            continue
        for m2 in range(-k2, k2 + 1, 2):
            col = np.zeros(index.dim, dtype=complex)
            col[index.pos[(i, 0, k2, m2)]] = math.sqrt(2.0)
            cols.append(col)
    vectors = (np.stack(cols, axis=1) if cols
               else np.zeros((index.dim, 0), dtype=complex))
    gram = np.eye(vectors.shape[1])
    return HilbertBasis(kind="E", bundle=V, N=N, index=index, vectors=vectors,
                        orthonormal=True, gram=gram,
                        degree_dims=(vectors.shape[1], 0))


def h_space(N: int) -> HilbertBasis:
    """Orthonormal basis of the holomorphic sections of O(N); dim N + 1."""
    if N < 1:
        raise ValueError("N must be >= 1")
    basis = closed_form_e_space(trivial_bundle(), N, lmax2=N + 2)
    return HilbertBasis(kind="H", bundle=basis.bundle, N=N, index=basis.index,
                        vectors=basis.vectors, orthonormal=True,
                        gram=basis.gram, degree_dims=basis.degree_dims)


def e_space(V: BundleSpec, N: int, lmax2: int | None = None,
            threshold: float | None = None) -> HilbertBasis:
    """Basis of the quantized-module fiber space for (V, N).

    Holomorphic case (no potential): closed-form holomorphic sections.
    With a potential: numerical kernel of the twisted Dirac operator.
    """
    if V.potential is None:
        return closed_form_e_space(V, N, lmax2)
    from . import dolbeault

    D = dolbeault.build_dolbeault(V, N, lmax2)
    proj = dolbeault.kernel_projector(D, threshold)
    return dolbeault.kernel_basis(D, proj)


def section_of_v(V: BundleSpec, components: list) -> "SectionOfV":
    return SectionOfV(V, tuple(components))


@dataclass(frozen=True, eq=False)
class SectionOfV:
    """Smooth section of V, one spin p_i/2 component field per summand."""

    bundle: BundleSpec
    components: tuple

    def __post_init__(self):
        if len(self.components) != self.bundle.rank:
            raise ValueError("one component per summand required")
        for i, f in enumerate(self.components):
            if f.s2 != self.bundle.degrees[i]:
                raise ValueError(f"component {i} has spin {f.s2}/2, "
                                 f"expected {self.bundle.degrees[i]}/2")

    @property
    def bandlimit2(self) -> int:
        return max(f.bandlimit2 for f in self.components)

    def sup_norm(self, grid: QuadratureGrid | None = None) -> float:
        """Sup over the sphere of the fiber norm."""
        if grid is None:
            b = self.bandlimit2
            grid = grid_for_bandlimit(2 * b + 8, 2 * b + 8)
        total = np.zeros((grid.n_theta, grid.n_phi))
        for f in self.components:
            total += np.abs(f.values(grid)) ** 2
        return float(np.sqrt(np.max(total)))


def random_section(V: BundleSpec, lmax: int, rng: np.random.Generator,
                   scale: float = 1.0) -> SectionOfV:
    comps = []
    for p in V.degrees:
        s2 = p
        coeffs = {}
        for l2 in range(abs(s2), 2 * lmax + 1, 2):
            for m2 in range(-l2, l2 + 1, 2):
                coeffs[(l2, m2)] = (rng.standard_normal()
                                    + 1j * rng.standard_normal()) * scale
        comps.append(SpinField(s2, coeffs))
    return SectionOfV(V, tuple(comps))


def constant_section(V: BundleSpec, values) -> SectionOfV:
    """Covariantly constant section; only trivial summands may be nonzero."""
    comps = []
    for i, p in enumerate(V.degrees):
        c = complex(values[i])
        if p != 0 and c != 0:
            raise ValueError("only O(0) summands admit constant sections")
        coeffs = {(0, 0): c * math.sqrt(4 * math.pi)} if c else {}
        comps.append(SpinField(p, coeffs))
    return SectionOfV(V, tuple(comps))


def pair_section(v: SectionOfV, psi: HilbertBasis,
                 grid: QuadratureGrid) -> np.ndarray:
    """Pointwise contraction v . psi_k as sections of O(N).

    Returns grid values of shape (nvec, n_theta, n_phi); only the degree-0
    components of psi contribute (the result lives in degree 0).
    """
    if v.bundle.degrees != psi.bundle.degrees:
        raise ValueError("bundle tags do not match")
    out = np.zeros((psi.dim, grid.n_theta, grid.n_phi), dtype=complex)
    for i in range(v.bundle.rank):
        vf = v.components[i].values(grid)
        out += vf[None, :, :] * psi.component_values(grid, i, 0)
    return out


def monomial_gram(N: int, grid: QuadratureGrid) -> np.ndarray:
    """Gram matrix of the monomial sections z^k of O(N) by quadrature.

    Closed form: diagonal with entries 2*pi * k! (N-k)! / (N+1)!.
    """
    vals = []
    ch, sh = np.cos(grid.theta / 2.0), np.sin(grid.theta / 2.0)
    for k in range(N + 1):
        m2 = N - 2 * k
        th = ch ** (N - k) * sh ** k
        vals.append(th[:, None] * harmonics.phi_phases(m2, grid)[None, :])
    g = np.empty((N + 1, N + 1), dtype=complex)
    for a in range(N + 1):
        for b in range(N + 1):
            g[a, b] = grid.integrate(np.conj(vals[a]) * vals[b])
    return g
