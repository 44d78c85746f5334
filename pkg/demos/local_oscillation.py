"""
Local oscillation and the L_p threshold
=======================================

A singularity |x|**-eta next to the strike caps the integrability of the
weak limit at p <= 1/(beta + eta).  The oscillation OSC_p measures eta
directly; the delta norms ||dG/dx(t, B_t)||_p measure how fast the hedge
ratio of a step blows up.
"""

import numpy as np

from discerr import Payoff, gaussian_pair_moment, osc
from discerr import Model, singularity_exponent
from discerr.smoothness import integrability_cap, pair_indicator_oracle

eps = 2.0 ** -np.arange(1, 9)
for eta in (0.1, 0.2, 0.4):
    vals = [osc(Payoff.power_singular(eta), 2, 0.0, e) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(vals), 1)[0]
    print(f"eta={eta}: OSC_2 slope in eps {slope:.4f}")

print("step: OSC_2 =", round(osc(Payoff.binary(0.0), 2, 0.0, 0.3), 10))

# Correlated Gaussian pair: for the step, E|h(Y) - h(Z)|^2 = arccos(t)/pi.
for t in (0.5, 0.9, 0.99):
    print(f"t={t}: pair moment {gaussian_pair_moment(Payoff.binary(0.0), 2, t):.8f}"
          f"  exact {pair_indicator_oracle(t):.8f}")

# Delta norms blow up like (1 - t)**(1/(2p) - 1/2).
for p in (2, 3, 4):
    print(f"p={p}: fitted exponent {singularity_exponent(Payoff.binary(0.0), Model('B'), p):.4f}"
          f"  expected {1 / (2 * p) - 0.5:.4f}")

print("largest p for beta=0.4, eta=0:", integrability_cap(0.4, 0.0))
