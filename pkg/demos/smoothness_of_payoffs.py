"""
Fractional smoothness of a step payoff
======================================

The step 1{x >= 0} sits right at smoothness 1/2 in the Gaussian Besov
scale.  Three views agree on this: the decay of its Hermite coefficients,
the blow-up of H(t) = ||d2G/dx2(t, B_t)||_2 towards maturity, and the two
integral conditions built from H.
"""

import numpy as np

from discerr import Model, Payoff, besov_norm, check_conditions, h_curve, hermite_coeffs

step = Payoff.binary(0.0)
bm = Model("B")

# Hermite coefficients: alpha_k**2 decays like k**-3/2 along odd k.
exp = hermite_coeffs((step, bm))
k = np.arange(1, exp.k_max + 1, 2)
slope = np.polyfit(np.log(k[10:]), np.log(exp.alpha[k[10:]] ** 2), 1)[0]
print(f"alpha_0 = {exp.alpha[0]:.6f}, alpha_1 = {exp.alpha[1]:.6f}")
print(f"log alpha_k^2 vs log k slope (odd k): {slope:.3f}")

# Partial Besov norms at k_max/8 .. k_max and the resulting verdicts.
for beta in (0.3, 0.4, 0.5, 0.6):
    r = besov_norm(exp, beta)
    print(f"beta={beta}: partial norms {np.round(r.partial_sums, 4)}  -> {r.verdict}")

# H(t) grows like (1 - t)**-3/4.
tau = np.logspace(-1, -4, 7)
h = h_curve(step, bm, None, tau=tau)
print("\n1 - t      H(t)")
for s, v in zip(tau, h):
    print(f"{s:.1e}  {v:10.4f}")
print("slope:", round(np.polyfit(np.log(tau), np.log(h), 1)[0], 4))

# Integral conditions: finite below 1/2, divergent above.
for beta in (0.4, 0.6):
    rep = check_conditions(step, bm, beta)
    print(f"beta={beta}: int (1-u)^(1-beta) H^2 du = {rep.cond5_integral:.4f} "
          f"({rep.cond5_verdict}), overall {rep.verdict}")
