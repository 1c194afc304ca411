"""
The optimal selling boundary
============================

Between the two trivial rules the optimal rule sells as soon as the ratio
M_t / Z_t reaches exp(sigma b(t)). The curve b solves a backward Volterra
equation and sits above the zero h of the drift.
"""

import numpy as np

from ultimax import ModelParams, TimeGrid, boundary_residual, solve_boundary

for mu in (0.2, 0.5, 0.8):
    curve = solve_boundary(ModelParams(mu, 1.0), TimeGrid.uniform(1.0, 100))
    res = boundary_residual(curve)
    print(f"mu={mu}: b(0)={curve.b_values[0]:.4f}  sell when M/Z >= {curve.threshold_ratio(0.0):.3f}"
          f"  residual {res.max:.1e}  clamped nodes {curve.clamped}")

# a finer grid converges toward the same curve
p = ModelParams(0.5, 1.0)
for n in (25, 50, 100, 200):
    c = solve_boundary(p, TimeGrid.uniform(1.0, n))
    print(f"n={n:4d}  b(0)={c.b_values[0]:.5f}  b(0.5)={float(c(0.5)):.5f}")

print("\nt, b(t), h(t)")
for t, b, h in zip(c.times[::25], c.b_values[::25], c.h_values[::25]):
    print(f"{t:.3f}  {b:.4f}  {h:.4f}")
assert np.all(np.diff(c.b_values) <= 0)
