"""Berezin-Toeplitz quantization on truncated Segal-Bargmann spaces.

The package works with the Gaussian-weighted space of entire functions on
``C^n`` at quantization parameter ``t``, truncated to polynomials of total
degree at most ``M``.  Symbols are matrix-valued functions on phase space;
their Toeplitz compressions, heat transforms and Weyl translations are
computed in the monomial basis.
"""

__version__ = "0.1.0"

from .core import QuantizationContext
from .errors import (AccuracyError, AssemblyError, DegenerateInputError, DimensionCapError, GrowthError,
                     ParameterError, QuadratureError, SpecMismatchError, StepSizeError, SymbolEvaluationError,
                     TailMassWarning, ToeplabError, UnsupportedVariantError)
from .fockbasis import CoefficientVector, TruncationSpec, basis_vector, coherent_coefficients
from .quadrature import QuadratureSpec
from .symbol import (BUILTINS, CallableSymbol, HeatParams, PolynomialSymbol, Symbol, abs_squared, constant,
                     heat_transform, linear_real, magnetic, monomial, off_diagonal_heat, re_z_cubed,
                     relativistic_kinetic, semigroup_identity_check, shift_interaction, sine_re, symbol_from_dict,
                     tensor)
from .toeplitz import (TruncatedOperator, assemble_toeplitz, berezin_transform, covariance_check, form_derivative,
                       harmonic_oscillator, integral_representation_check, operator_norm, rotation_covariance_check,
                       weyl_matrix, weyl_relation_check)
from .criteria import (bc_constant, bc_verify, commutator_diagnostics, main_theorem_hypothesis_check,
                       oscillation_estimate, perturbation_bound_check, taylor_remainder_check, theta_derivative_bound)
from .dynamics import EvolutionConfig, classical_flow, completeness_experiment, quantum_evolve
