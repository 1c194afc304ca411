"""
Expected ratio of the maximum to the selling price
==================================================

Selling at time t when the log running maximum sits x above the log price
leaves an expected ratio G(t, x) for the rest of the horizon. Its drift
H = G_t - lam G_x + G_xx / 2 decides whether waiting pays.
"""

import numpy as np

from ultimax import ModelParams, drift_H, gain, gain_integral, h_curve

# a stock with drift 0.5 and volatility 1 over one year
p = ModelParams(mu=0.5, sigma=1.0, horizon=1.0)
print(f"lambda = (mu - sigma^2/2) / sigma = {p.lam}")

# the closed form agrees with direct integration against the maximum's law
for t, x in [(0.0, 0.0), (0.3, 0.5), (0.8, 1.5)]:
    print(f"G({t}, {x}) = {gain(t, x, p):.12f}   integral: {gain_integral(t, x, p):.12f}")

# H changes sign once in x; the zero h(t) moves down to 0 at the horizon
xs = np.linspace(0.0, 3.0, 7)
print("\nH(0.5, x) on", xs)
print(np.round(drift_H(0.5, xs, p), 5))
for t in (0.0, 0.5, 0.9, 1.0):
    print(f"h({t}) = {h_curve(t, p):.5f}")

# outside 0 < mu < sigma^2 the sign of H is constant
for mu in (-0.5, 1.5):
    q = ModelParams(mu, 1.0)
    print(f"mu={mu}: H(0.5, 0.5) = {float(drift_H(0.5, 0.5, q)):+.5f}")
