"""Matrix quantization of the sphere and of line bundles over it.

Modules:
  numerics      quadrature, eigensolvers, norms, exact Wigner 3j
  harmonics     spin-weighted harmonics, ladder coefficients, triple integrals
  geometry      the CP^1 model and scalar symbols
  bundles       line-bundle sums, connections/potentials, section spaces
  dolbeault     twisted Dirac operators, spectra, kernel projectors
  quantization  Toeplitz/geometric maps and convergence diagnostics
  modules_k     quantized modules, rank formulas, comparators, idempotents
  experiments   the CLI experiment registry
"""

from .bundles import (BundleSpec, HilbertBasis, Potential, SectionOfV,
                      SpinField, e_space, h_space, line_bundle,
                      random_potential, random_section, trivial_bundle)
from .dolbeault import (DolbeaultOperator, build_dolbeault, kernel_basis,
                        kernel_degree_split, kernel_projector,
                        projector_distance, spectrum_d2,
                        weitzenbock_constant)
from .geometry import (CP1, KahlerModel, Symbol, cos_theta, gradient_sup_norm,
                       integrate, laplacian, sup_norm, ylm, ylm_real)
from .modules_k import (K0Class, RankPolynomial, bott_projector, comparator,
                        idempotent_trace_check, k0_equal_mod_finite,
                        lift_idempotent, morphism_pushforward,
                        rank_polynomial, rank_sequence, spinor_rank_gap)
from .numerics import (QuadratureGrid, gauss_legendre_sphere, hermitian_eigen,
                       operator_norm, wigner3j)
from .quantization import (QuantOperator, commutator_projector_bound,
                           geometric, geometric_module, gq_toeplitz_gap,
                           module_covariance_defect, multiplicativity_defect,
                           norm_convergence, normalized_trace, toeplitz,
                           toeplitz_module, trace_asymptotics,
                           tuynman_residual)

__version__ = "0.1.0"
