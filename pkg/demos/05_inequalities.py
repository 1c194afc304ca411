"""
Exponential bounds for the reflected process
============================================

For the reflected process X = x v S - B the expectations E exp(+-X_t) are
compared with exp(+-x) by quadrature. Each bound holds on a range of
drifts and becomes an equality at the edge of that range and at x = 0.
The four comparisons of trivial rules are checked by simulation.
"""

from ultimax import ModelParams, SimConfig, check_inequality

for ineq, lams in [("4.56", [-0.5, 0.0, 1.0]), ("4.57", [0.5, 2.0]), ("4.58", [-2.0, -0.5]), ("4.59", [-1.0, 0.5])]:
    rep = check_inequality(ineq, lams, points=[(0.5, 0.0), (0.5, 1.0), (1.0, 2.0)], method="transition")
    print(f"{ineq}: passed={rep.passed}  worst margin {rep.worst_margin:+.2e}")

cfg = SimConfig(n_paths=20_000, n_steps=100, seed=1)
for ineq, mu in [("4.2", 1.0), ("4.3", 0.2), ("4.45", 1.5), ("4.46", -0.5)]:
    rep = check_inequality(ineq, params=ModelParams(mu, 1.0), config=cfg)
    print(f"{ineq} at mu={mu}: passed={rep.passed}  worst margin {rep.worst_margin:+.4f}")
