"""
Phase-space translations
========================

Weyl operators move the vacuum to coherent states, compose up to a phase,
and conjugate Toeplitz operators into Toeplitz operators of shifted symbols.
"""

import numpy as np

from toeplab import (QuantizationContext, TruncationSpec, abs_squared, covariance_check, re_z_cubed,
                     rotation_covariance_check, weyl_matrix, weyl_relation_check)
from toeplab.fockbasis import coherent_coefficients

spec = TruncationSpec(QuantizationContext(1, 0.5), 60)

w = 0.4 - 0.2j
W = weyl_matrix(spec, w).matrix
print("|W_w e_0 - k_w|      =", np.abs(W[:, 0] - coherent_coefficients(spec, w).coeffs).max())
print("|W W^* - 1|          =", np.abs(W @ W.conj().T - np.eye(spec.dim)).max())

# the composition law is checked on the degree <= M/2 block, where truncation does not reach
print("Weyl relation        :", weyl_relation_check(spec, 0.3, 0.3j))

###############################################################################
# Covariance: translating the symbol is the same as conjugating by W.
# Rotations act diagonally and commute with the total-degree cutoff, so the
# rotated identity holds on the full matrix.

print("translation, |z|^2   :", covariance_check(abs_squared(), spec, 1.0))
print("rotation, Re z^3     :", rotation_covariance_check(re_z_cubed(), TruncationSpec(spec.ctx, 20), np.pi / 3))
