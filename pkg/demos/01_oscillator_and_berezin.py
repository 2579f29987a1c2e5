"""
The harmonic oscillator and the Berezin transform
=================================================

Quantize |z|^2 on the truncated space, look at its spectrum, and recover
the heat-smoothed symbol from coherent-state expectations.
"""

import numpy as np

from toeplab import (QuantizationContext, TruncationSpec, abs_squared, assemble_toeplitz, berezin_transform,
                     harmonic_oscillator, heat_transform, sine_re)

# t = 1/2 makes the normalization 2t = 1, so factorials stay readable
ctx = QuantizationContext(n=1, t=0.5)
spec = TruncationSpec(ctx, M=40)

T = assemble_toeplitz(abs_squared(), spec)
print("first eigenvalues of T_{|z|^2}:", np.round(T.eigenvalues()[:5], 12))

# half of T_{|z|^2} is the number operator t(|nu| + n)
N = harmonic_oscillator(spec)
print("max |T/2 - N| =", np.abs(0.5 * T.matrix - N.matrix).max())

###############################################################################
# The Berezin transform <T_f k_z, k_z> equals the heat transform of f at time t.
# For |z|^2 that is |z|^2 + 2t; for sin(Re z) it is exp(-t/2) sin(Re z).

z = np.array([0.0, 0.5, 0.3 - 0.7j, 1.0j])
print("Berezin of T_{|z|^2}:", berezin_transform(T, z)[:, 0, 0].real)
print("|z|^2 + 2t          :", np.abs(z) ** 2 + 2 * ctx.t)

S = assemble_toeplitz(sine_re(), spec)
smooth = heat_transform(sine_re(), ctx.t)
print("Berezin of T_sin    :", berezin_transform(S, z)[:, 0, 0].real)
print("heat transform      :", smooth(z)[:, 0, 0].real)
