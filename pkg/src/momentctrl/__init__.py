"""Moment-space design of open-loop broadcast controls for linear ensembles.

A single input signal u(t) is applied to every member of a parametric family
x'(t, beta) = A(beta) x + B(beta) u, beta in [-1, 1]. Expanding the state in
normalized Legendre polynomials of beta turns the family into one banded
moment system; controls designed on its truncations steer all members at
once. The package builds the moment systems, synthesizes minimum-energy
controls, and certifies the result either by simulating the ensemble or by
a computable sampling-free error bound.
"""

from ._kernels import (available_backends, backend, ensemble_endpoints,
                       linear_trajectory, set_backend)
from .banded import (BandedMatrix, DecayParams, entry_decay_bound, expm,
                     is_hermitian, k_factor, kbar_factor, matrix_bandwidth,
                     norm_bound, truncate, truncation_exp_bound)
from .bounds import (l_tail, optimize_rho, scalar_tail_objective, total_bound,
                     w_envelope)
from .controllability import (DENSENESS_CAVEAT, controllability_matrix,
                              denseness_sweep, rank_test, witness_check)
from .ensemble import (DEFAULT_VALIDATION_GRID, EnsembleSnapshot, Profile,
                       Segment, SimulationError, l2_distance, l2_norm,
                       preset_profiles, segment_quadrature, simulate_ensemble)
from .legendre import (QuadratureRule, analyze, eval_normalized_legendre,
                       gauss_factor, gauss_legendre_rule, product_coeff,
                       recurrence_coeff, synthesize)
from .moments import (REFERENCE_ORDER, MomentSystem, PolynomialEnsemble,
                      build_moment_system, prototype_ensemble,
                      prototype_system, simulate_truncated)
from .synthesis import (DEFAULT_SEGMENTS, ControlSignal, DesignError,
                        DesignReport, IterationRecord, SymmetryError,
                        algorithm_a_priori, algorithm_sampling_free, gramian,
                        gramian_control, min_energy_control, reference_design)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # legendre basis
    "recurrence_coeff", "eval_normalized_legendre", "gauss_factor",
    "product_coeff", "QuadratureRule", "gauss_legendre_rule", "analyze",
    "synthesize",
    # banded operators and decay envelopes
    "BandedMatrix", "DecayParams", "matrix_bandwidth", "is_hermitian",
    "norm_bound", "truncate", "expm", "k_factor", "kbar_factor",
    "entry_decay_bound", "truncation_exp_bound",
    # moment systems
    "PolynomialEnsemble", "MomentSystem", "build_moment_system",
    "prototype_system", "prototype_ensemble", "simulate_truncated",
    "REFERENCE_ORDER",
    # controllability
    "controllability_matrix", "rank_test", "witness_check",
    "denseness_sweep", "DENSENESS_CAVEAT",
    # control synthesis
    "ControlSignal", "IterationRecord", "DesignReport", "DesignError",
    "SymmetryError", "min_energy_control", "gramian", "gramian_control",
    "reference_design", "algorithm_a_priori", "algorithm_sampling_free",
    "DEFAULT_SEGMENTS",
    # error bounds
    "l_tail", "w_envelope", "total_bound", "optimize_rho",
    "scalar_tail_objective",
    # ensemble simulation
    "Profile", "Segment", "EnsembleSnapshot", "SimulationError",
    "preset_profiles", "simulate_ensemble", "l2_distance", "l2_norm",
    "segment_quadrature", "DEFAULT_VALIDATION_GRID",
    # compute backends
    "backend", "set_backend", "available_backends", "linear_trajectory",
    "ensemble_endpoints",
]
