"""
Evidence for and against the oscillation hypothesis
===================================================

Symbols whose smoothed first derivatives oscillate boundedly give Toeplitz
operators that the harmonic oscillator controls.  Re z^3 fails both the
hypothesis and the commutator bounds, and the failure shows up as a
square-root growth of the constant c1(m) with the cutoff.
"""

from toeplab import (QuantizationContext, TruncationSpec, abs_squared, bc_verify, commutator_diagnostics,
                     main_theorem_hypothesis_check, re_z_cubed, relativistic_kinetic, sine_re)

ctx = QuantizationContext(1, 0.5)
symbols = {
    "|z|^2": abs_squared(),
    "sin(Re z)": sine_re(),
    "sqrt(xi^2 + 1) + sin x": relativistic_kinetic(1.0) + sine_re(),
    "Re z^3": re_z_cubed(),
}

for name, f in symbols.items():
    rep = main_theorem_hypothesis_check(f, 0.125, ctx)
    print(f"{name:<24} hypothesis {'PASS' if rep.verdict else 'FAIL'}  failing={rep.failing}")

###############################################################################
# Commutator constants against N over a ladder of cutoffs

cutoffs = [10, 20, 40, 80, 160]
for name in ("|z|^2", "sin(Re z)", "Re z^3"):
    d = commutator_diagnostics(symbols[name], ctx, cutoffs)
    print(f"{name:<10} c1 = {[round(c, 3) for c in d.c1]}  growth exponent {d.exponent_c1:.3f}")

###############################################################################
# The norm estimate through the heat transform, at a bounded symbol

r = bc_verify(sine_re(), 0.125, TruncationSpec(ctx, 40))
print(f"||T_sin|| = {r.lhs:.4f} <= {r.rhs:.4f}  (C = {r.constant:g}, slack {r.slack:.4f})")
