from __future__ import annotations

import math

import numpy as np
import pytest

from ultimax import (
    BoundaryRatio,
    DomainError,
    FixedTime,
    Immediate,
    ModelParams,
    RatioThreshold,
    ResourceError,
    SimConfig,
    Terminal,
    check_inequality,
    default_rules,
    estimate_objective,
    gain,
    run_rules,
    simulate_ensemble,
)
from ultimax.montecarlo import McEstimate


def test_sim_config_validation():
    with pytest.raises(DomainError):
        SimConfig(n_paths=0)
    with pytest.raises(DomainError):
        SimConfig(n_steps=0)
    with pytest.raises(DomainError):
        SimConfig(z0=0.0)
    with pytest.raises(DomainError):
        SimConfig(seed=-1)


def test_memory_budget():
    with pytest.raises(ResourceError):
        simulate_ensemble(ModelParams(0.5, 1.0), SimConfig(n_paths=100_000, n_steps=1000, memory_budget=2**20))
    # streaming is fine with the same budget as long as one block fits
    cfg = SimConfig(n_paths=300, n_steps=10, block_size=100, memory_budget=2**20)
    run_rules(ModelParams(0.5, 1.0), cfg, [Immediate()])


def test_deterministic_path_for_tiny_sigma():
    ens = simulate_ensemble(ModelParams(0.3, 1e-8), SimConfig(n_paths=50, n_steps=20, seed=1))
    ratio = np.exp(ens.log_m[:, -1] - ens.log_z[:, -1])
    assert np.all(np.abs(ratio - 1.0) <= 1e-6)


def test_price_mean_is_exponential_in_drift():
    p = ModelParams(0.4, 0.8, 1.5)
    ens = simulate_ensemble(p, SimConfig(n_paths=40_000, n_steps=4, seed=5, z0=2.0))
    z = np.exp(ens.log_z[:, -1]) / 2.0
    assert abs(z.mean() - math.exp(p.mu * p.horizon)) <= 3 * z.std() / math.sqrt(z.size)


def test_running_max_mean_matches_gain():
    p = ModelParams(0.0, 1.0)
    est = run_rules(p, SimConfig(n_paths=200_000, n_steps=1, seed=9, block_size=20_000), [Immediate()])
    e = est.estimate("immediate", "ratio-inf")
    assert abs(e.mean - gain(0.0, 0.0, p)) <= 3 * e.std_error


def test_running_max_is_consistent():
    ens = simulate_ensemble(ModelParams(0.2, 1.0), SimConfig(n_paths=200, n_steps=30, seed=2))
    assert np.all(ens.log_m >= ens.log_z - 1e-15)
    assert np.all(np.diff(ens.log_m, axis=1) >= 0)
    assert np.all(ens.log_z[:, 0] == 0.0) and np.all(ens.log_m[:, 0] == 0.0)
    with pytest.raises(ValueError):
        ens.log_z[0, 0] = 1.0


def test_determinism_across_workers_and_blocks():
    p = ModelParams(0.5, 1.0)
    rules = [Immediate(), FixedTime(0.5), RatioThreshold(1.2), Terminal()]
    a = run_rules(p, SimConfig(n_paths=1000, n_steps=50, seed=7, block_size=1000), rules, ("ratio-inf", "ratio-sup"))
    b = run_rules(p, SimConfig(n_paths=1000, n_steps=50, seed=7, block_size=77), rules, ("ratio-inf", "ratio-sup"), workers=3)
    for obj in ("ratio-inf", "ratio-sup"):
        for name in a.names:
            assert np.array_equal(a.samples[obj][name], b.samples[obj][name])
    ens = simulate_ensemble(p, SimConfig(n_paths=1000, n_steps=50, seed=7))
    e = estimate_objective(ens, RatioThreshold(1.2), "ratio-inf")
    assert e == a.estimate("ratio(1.2)", "ratio-inf")
    c = run_rules(p, SimConfig(n_paths=1000, n_steps=50, seed=8), rules)
    assert not np.array_equal(a.samples["ratio-inf"]["terminal"], c.samples["ratio-inf"]["terminal"])


def test_rule_stop_indices():
    p = ModelParams(0.5, 1.0)
    ens = simulate_ensemble(p, SimConfig(n_paths=100, n_steps=10, seed=4))
    args = (ens.times, ens.log_z, ens.log_m, p)
    assert np.all(Immediate().stop_index(*args) == 0)
    assert np.all(Terminal().stop_index(*args) == 10)
    assert np.all(FixedTime(0.5).stop_index(*args) == 5)
    assert np.all(FixedTime(0.55).stop_index(*args) == 6)
    assert np.all(RatioThreshold(1.0).stop_index(*args) == 0)
    idx = RatioThreshold(1.1).stop_index(*args)
    ratio = ens.log_m - ens.log_z
    for i, k in enumerate(idx):
        assert np.all(ratio[i, :k] < math.log(1.1))
        assert k == 10 or ratio[i, k] >= math.log(1.1)
    with pytest.raises(DomainError):
        RatioThreshold(0.9)


def test_rules_are_adapted(curve_for):
    # replacing the path after the stopping index never moves the stopping index
    p = ModelParams(0.5, 1.0)
    curve = curve_for(0.5)
    ens = simulate_ensemble(p, SimConfig(n_paths=400, n_steps=100, seed=12))
    perm = np.roll(np.arange(400), 1)
    for rule in [RatioThreshold(1.2), BoundaryRatio(curve), FixedTime(0.3)]:
        idx = rule.stop_index(ens.times, ens.log_z, ens.log_m, p)
        z, m = ens.log_z.copy(), ens.log_m.copy()
        cols = np.arange(z.shape[1])[None, :]
        after = cols > idx[:, None]
        z[after] = ens.log_z[perm][after]
        m[after] = ens.log_m[perm][after]
        assert np.array_equal(rule.stop_index(ens.times, z, m, p), idx)


def test_bridge_max_is_stable_and_grid_max_is_biased():
    p = ModelParams(0.0, 1.0)
    means = {}
    for bridge in (True, False):
        for n in (4, 16, 64):
            cmp = run_rules(p, SimConfig(n_paths=40_000, n_steps=n, seed=21, bridge_max=bridge), [Immediate()])
            means[bridge, n] = cmp.estimate("immediate", "ratio-inf")
    on = [means[True, n] for n in (4, 16, 64)]
    for a, b in zip(on[:-1], on[1:]):
        assert abs(a.mean - b.mean) <= 3 * math.hypot(a.std_error, b.std_error)
    off = [means[False, n].mean for n in (4, 16, 64)]
    assert off[0] < off[1] < off[2] < on[-1].mean


def test_objectives_and_estimates():
    p = ModelParams(0.5, 1.0)
    ens = simulate_ensemble(p, SimConfig(n_paths=2000, n_steps=20, seed=1))
    inf = estimate_objective(ens, Terminal(), "ratio-inf")
    sup = estimate_objective(ens, Terminal(), "ratio-sup")
    assert inf.mean >= 1.0 and 0.0 < sup.mean <= 1.0
    assert inf.std_error > 0 and inf.n_paths == 2000 and inf.seed == 1
    with pytest.raises(DomainError):
        estimate_objective(ens, Terminal(), "ratio")
    e = McEstimate.from_samples(np.array([1.0, 3.0]), 0)
    assert e.mean == 2.0 and e.std_error == pytest.approx(1.0)


def test_comparison_report_shape():
    p = ModelParams(1.0, 1.0)
    cmp = run_rules(p, SimConfig(n_paths=500, n_steps=20, seed=3), [Immediate(), Terminal()], ("ratio-sup",))
    d = cmp.as_dict()
    assert set(d["ratio-sup"]["estimates"]) == {"immediate", "terminal"}
    assert "immediate - terminal" in d["ratio-sup"]["differences"]
    with pytest.raises(DomainError):
        run_rules(p, SimConfig(n_paths=10, n_steps=2), [Immediate(), Immediate()])


def test_default_rule_family(curve_for):
    p = ModelParams(0.5, 1.0)
    names = [r.name for r in default_rules(p)]
    assert names == ["immediate", "fixed(0.5)", "ratio(1.2)", "terminal"]
    assert "boundary" in [r.name for r in default_rules(p, curve_for(0.5))]


def test_terminal_wins_supremum_with_strong_drift():
    rep = check_inequality("4.2", params=ModelParams(1.0, 1.0), config=SimConfig(n_paths=20_000, n_steps=200, seed=5))
    assert rep.passed
    assert rep.method == "monte-carlo"
    assert np.all(rep.margins > 0)


@pytest.mark.parametrize("ineq,mu", [("4.2", 0.4), ("4.3", 0.6), ("4.45", 0.9), ("4.46", 0.1)])
def test_monte_carlo_inequalities_domain(ineq, mu):
    with pytest.raises(DomainError):
        check_inequality(ineq, params=ModelParams(mu, 1.0), config=SimConfig(n_paths=10, n_steps=2))


@pytest.mark.parametrize("ineq,lam", [("4.56", -0.6), ("4.57", 0.2), ("4.58", 0.0), ("4.59", 0.6)])
def test_quadrature_inequalities_domain(ineq, lam):
    with pytest.raises(DomainError):
        check_inequality(ineq, [lam])


def test_unknown_inequality():
    with pytest.raises(DomainError):
        check_inequality("4.99")


@pytest.mark.parametrize("ineq,lam", [("4.56", 0.0), ("4.57", 1.0), ("4.58", -1.0), ("4.59", 0.0)])
def test_quadrature_inequalities_hold_and_tie_at_zero(ineq, lam):
    rep = check_inequality(ineq, [lam], method="transition")
    assert rep.passed
    pts = np.array(rep.points)
    at_zero = pts[:, 2] == 0.0
    assert np.all(np.abs(rep.margins[at_zero]) <= 1e-6)
    assert np.all(rep.margins[~at_zero] >= -1e-6)


def test_joint_and_transition_inequality_routes_agree():
    a = check_inequality("4.56", [0.5], points=[(0.5, 0.5), (1.0, 1.5)], method="joint")
    b = check_inequality("4.56", [0.5], points=[(0.5, 0.5), (1.0, 1.5)], method="transition")
    assert np.allclose(a.left, b.left, atol=1e-7)
    assert np.array_equal(a.right, b.right)
