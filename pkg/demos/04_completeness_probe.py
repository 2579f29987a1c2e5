"""
Classical escape and quantum leakage
====================================

The flow of Re z^3 started at z = 1 leaves every ball in finite time.  Its
quantized evolution cannot escape a finite truncation, but mass piles up in
the top degrees.  This script puts the two side by side; it does not draw a
conclusion from a single orbit.
"""

import numpy as np

from toeplab import EvolutionConfig, QuantizationContext, abs_squared, completeness_experiment, re_z_cubed

ctx = QuantizationContext(1, 0.5)
cfg = EvolutionConfig(tau=1.0, h=1e-3, cutoffs=(20, 40, 80), n_times=101)

rep = completeness_experiment(re_z_cubed(), 1.0, ctx, cfg)
print(rep.summary)
for M in rep.cutoffs:
    curve = np.array(rep.leakage[M])
    print(f"M={M:3d}  leakage at tau=0.1, 0.5, 1.0: {curve[10]:.2e} {curve[50]:.2e} {curve[100]:.2e}")

###############################################################################
# For comparison the oscillator: rotation keeps the degree profile fixed

rep = completeness_experiment(abs_squared(), 1.0, ctx, EvolutionConfig(tau=3 * np.pi, cutoffs=(20, 40), n_times=61))
print(rep.summary)
