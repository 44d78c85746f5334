"""
The renormalized error and its weak limit
=========================================

sqrt(n) C_1 converges in law to W evaluated at a random clock A, with W
independent of the asset path.  Here both sides are sampled for a call on
geometric Brownian motion and compared by a two-sample KS distance.
"""

import math

import numpy as np

from discerr import Model, Payoff, RngStream, build_net, clock_mean, ks_distance, sample_Z
from discerr.estimators import collect_samples, ks_band, terminal_error_sampler

payoff = Payoff.call(1.0)
model = Model("S")
beta, n, m = 1.0, 128, 5000
base = RngStream(11)

err = collect_samples(terminal_error_sampler(payoff, model, build_net(n, beta), scale=math.sqrt(n)),
                      m, base.spawn(1))

# The clock is integrated along each path; Z(1) = sqrt(A) N(0, 1) with the
# normal drawn from a separate stream.
limit = sample_Z(payoff, model, beta, [0.5, 1.0], base.spawn(2), base.spawn(3), n_paths=m,
                 n_intervals=256)
z = limit.z_values[:, -1]

print(f"E A(1): Monte Carlo {limit.a_terminal.mean():.4f}, quadrature {clock_mean(payoff, model, beta):.4f}")
print(f"E n C_1^2 = {np.mean(err ** 2):.4f},  E Z(1)^2 = {np.mean(z ** 2):.4f}")
print(f"KS distance {ks_distance(err, z):.4f} (99% band {ks_band(m, m):.4f})")

# Quantiles side by side
q = [0.01, 0.1, 0.5, 0.9, 0.99]
print("quantile  sqrt(n)C_1   Z(1)")
for level, a, b in zip(q, np.quantile(err, q), np.quantile(z, q)):
    print(f"{level:7.2f}  {a:10.4f} {b:8.4f}")
