"""
Value functions and regimes
===========================

Minimising the expected ratio M_T / Z_tau has three regimes: sell at once
when mu <= 0, hold to the end when mu >= sigma^2 and follow the boundary in
between. Maximising the ratio Z_tau / M_T is bang-bang with a tie at
mu = sigma^2 / 2.
"""

from ultimax import (
    ModelParams,
    TimeGrid,
    classify_infimum,
    classify_supremum,
    eval_J,
    gain,
    solve_boundary,
    validate_fb_conditions,
    value_V1,
    value_V2,
)

for mu in (-0.5, 0.2, 0.5, 0.8, 1.5):
    p = ModelParams(mu, 1.0)
    curve = solve_boundary(p, TimeGrid.uniform(1.0, 100)) if 0 < mu < 1 else None
    v1 = value_V1(p, curve)
    v2 = value_V2(p)
    print(f"mu={mu:+.1f}  V1={v1.value:.5f} ({classify_infimum(p).value}: {v1.rule()})"
          f"  G={float(gain(0, 0, p)):.5f}  J={eval_J(0, 0, p, method='transition'):.5f}")
    print(f"          V2={v2.value:.5f} ({classify_supremum(p).value})")

# the solved value satisfies the free-boundary conditions
p = ModelParams(0.5, 1.0)
rep = validate_fb_conditions(p, solve_boundary(p, TimeGrid.uniform(1.0, 100)))
print("\nfree-boundary checks:", {k: f"{v:.1e}" for k, v in rep.as_dict().items() if isinstance(v, float)})
