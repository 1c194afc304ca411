"""Acceptance criteria at their pinned tolerances.

Each test records one PASS/FAIL line, printed again in the terminal summary.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from conftest import ACCEPTANCE_LINES, cached_curve
from ultimax import (
    InfimumRegime,
    ModelParams,
    QuadratureSpec,
    SimConfig,
    boundary_residual,
    check_inequality,
    classify_infimum,
    default_rules,
    drift_H,
    eval_J,
    gain,
    gain_integral,
    h_curve,
    run_rules,
    validate_fb_conditions,
    value_infimum,
    value_V1,
    value_V2,
)

SIGMA, T = 1.0, 1.0
MC = SimConfig(n_paths=100_000, n_steps=1000, seed=20261019)


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@lru_cache(maxsize=None)
def family(mu: float):
    """Default rule family on one shared ensemble, both objectives."""
    p = ModelParams(mu, SIGMA, T)
    curve = cached_curve(mu) if classify_infimum(p) is InfimumRegime.BOUNDARY else None
    return run_rules(p, MC, default_rules(p, curve), ("ratio-inf", "ratio-sup"))


def extremal(cmp, best: str, objective: str, direction: str):
    """Worst margin of ``best`` over the others, in units of 3 paired standard errors."""
    worst = math.inf
    for name in cmp.names:
        if name == best:
            continue
        d = cmp.difference(best, name, objective)
        margin = d.mean if direction == "max" else -d.mean
        worst = min(worst, margin / (3 * d.std_error))
    return worst


# ---------------------------------------------------------------- 1 -----


def test_criterion_01_closed_form_vs_integral():
    rng = np.random.default_rng(1)
    worst = 0.0
    for mu in (-0.5, 0.0, 0.3, 0.5, 0.8, 1.2):
        p = ModelParams(mu, SIGMA, T)
        for _ in range(50):
            t, x = rng.uniform(0.0, T), rng.uniform(0.0, 3.0)
            for sign in (1, -1):
                ref = gain_integral(t, x, p, sign)
                worst = max(worst, abs(gain(t, x, p, sign) - ref) / abs(ref))
    record(1, "closed-form gain vs integral", worst <= 1e-8, f"max rel err {worst:.2e} (tol 1e-8, 600 points)")


# ---------------------------------------------------------------- 2 -----


def test_criterion_02_drift_vs_finite_differences():
    rng = np.random.default_rng(2)
    k, h = 1e-5, 1e-4
    worst = 0.0
    for _ in range(100):
        mu = float(rng.choice([-0.5, 0.0, 0.3, 0.5, 0.8, 1.2]))
        p = ModelParams(mu, SIGMA, T)
        t, x = rng.uniform(0.01, 0.99), rng.uniform(0.01, 3.0)
        for sign in (1, -1):
            g = lambda tt, xx: gain(tt, xx, p, sign)  # noqa: E731
            gt = (g(t + k, x) - g(t - k, x)) / (2 * k)
            gx = (g(t, x + h) - g(t, x - h)) / (2 * h)
            gxx = (g(t, x + h) - 2 * g(t, x) + g(t, x - h)) / h**2
            fd = gt - p.lam * gx + 0.5 * gxx
            # relative to the size of the terms, so zeros of H do not inflate the ratio
            scale = max(abs(fd), abs(gt) + abs(p.lam * gx) + 0.5 * abs(gxx))
            worst = max(worst, abs(drift_H(t, x, p, sign) - fd) / scale)
    record(2, "H vs G_t - lam G_x + G_xx/2", worst <= 1e-4, f"max rel err {worst:.2e} (tol 1e-4, 100 points x 2 signs)")


# ---------------------------------------------------------------- 3 -----


def test_criterion_03_sign_regimes_of_H():
    # close to T and far out |H| drops below the smallest double, so sample where it is representable
    tt, xx = np.meshgrid(np.linspace(0.0, 0.98, 40), np.linspace(0.01, 3.0, 40))
    pos = all(np.all(drift_H(tt, xx, ModelParams(mu, SIGMA, T)) > 0) for mu in (-0.5, 0.0))
    t0, x0 = np.meshgrid(np.linspace(0.0, 0.98, 40), np.linspace(0.0, 3.0, 41))
    neg = all(np.all(drift_H(t0, x0, ModelParams(mu, SIGMA, T)) < 0) for mu in (1.0, 1.5))
    single, h_ok = True, True
    xs = np.linspace(0.0, 4.0, 801)
    for mu in (0.2, 0.5, 0.8):
        p = ModelParams(mu, SIGMA, T)
        ts = np.linspace(0.0, T, 100)
        hs = np.array([h_curve(t, p) for t in ts])
        h_ok &= hs[-1] == 0.0 and bool(np.all(np.diff(hs) < 0))
        for t, ht in zip(ts[:-1], hs[:-1]):
            s = np.sign(drift_H(t, xs, p))
            changes = np.count_nonzero(np.diff(s[s != 0]))
            single &= changes == 1 and abs(xs[np.argmax(s > 0)] - ht) <= xs[1]
    ok = pos and neg and single and h_ok
    record(
        3,
        "sign regimes of H",
        ok,
        f"H>0 for mu<=0: {pos}; H<0 for mu>=1: {neg}; one sign change at h: {single}; h(T)=0 and decreasing: {h_ok}",
    )


# ---------------------------------------------------------------- 4 -----


def test_criterion_04_volterra_solution():
    ok, parts = True, []
    for mu in (0.2, 0.5, 0.8):
        c = cached_curve(mu)
        res = boundary_residual(c)
        coarse = boundary_residual(cached_curve(mu, 100))
        inv = c.b_values[-1] == 0.0 and np.all(np.diff(c.b_values) <= 0) and np.all(c.b_values >= c.h_values)
        good = bool(inv) and res.max <= 1e-3 and res.max < coarse.max
        ok &= good
        parts.append(
            f"mu={mu}: b(0)={c.b_values[0]:.4f} residual n=100 {coarse.max:.1e} -> n=200 {res.max:.1e}"
            + (f" ({len(c.clamped)} clamped)" if c.clamped else "")
        )
    record(4, "Volterra boundary", ok, "; ".join(parts))


# ---------------------------------------------------------------- 5 -----


def test_criterion_05_value_coherence():
    ok, parts = True, []
    for mu in (0.2, 0.5, 0.8):
        p = ModelParams(mu, SIGMA, T)
        c, c_half = cached_curve(mu), cached_curve(mu, 100)
        V = value_infimum(0.0, 0.0, p, c)
        G = float(gain(0.0, 0.0, p))
        J = eval_J(0.0, 0.0, p, method="transition")
        # tolerances: grid halving for V, panel doubling for J
        tol_V = abs(V - value_infimum(0.0, 0.0, p, c_half))
        tol_J = abs(J - eval_J(0.0, 0.0, p, QuadratureSpec(128, 128), method="transition"))
        pooled = math.hypot(tol_V, tol_J) + 1e-12
        gap = min(G, J) - V
        terminal = all(value_infimum(T, x, p, c) == math.exp(SIGMA * x) for x in (0.0, 0.5, 2.0))
        ts = np.linspace(0.0, 0.95, 10)
        worst_inc = math.inf
        for x in np.linspace(0.0, 1.5 * c.b_values[0], 10):
            d = [value_infimum(t, x, p, c) - float(gain(t, x, p)) for t in ts]
            worst_inc = min(worst_inc, float(np.min(np.diff(d))))
        good = gap > 5 * pooled and terminal and worst_inc >= -1e-6
        ok &= good
        parts.append(f"mu={mu}: V={V:.5f} gap={gap:.3f} ({gap / pooled:.0f} tol) min dt(V-G)={worst_inc:.1e}")
    record(5, "value coherence", ok, "; ".join(parts))


# ---------------------------------------------------------------- 6 -----


def test_criterion_06_free_boundary_conditions():
    c = cached_curve(0.5)
    rep = validate_fb_conditions(c.params, c)
    ok = rep.normal_reflection <= 1e-3 and rep.smooth_fit <= 5e-3 and len(rep.times) == 10
    record(
        6,
        "normal reflection and smooth fit",
        ok,
        f"|V_x(t,0+)| <= {rep.normal_reflection:.1e} (tol 1e-3), slope jump <= {rep.smooth_fit:.1e} (tol 5e-3)",
    )


# ---------------------------------------------------------------- 7 -----


def test_criterion_07_monte_carlo_cross_check():
    p = ModelParams(0.5, SIGMA, T)
    cmp = family(0.5)
    imm = cmp.estimate("immediate", "ratio-inf")
    bnd = cmp.estimate("boundary", "ratio-inf")
    G = float(gain(0.0, 0.0, p))
    V1 = value_V1(p, cached_curve(0.5)).value
    z_imm = (imm.mean - G) / imm.std_error
    z_bnd = (bnd.mean - V1) / bnd.std_error
    d_imm = cmp.difference("boundary", "immediate", "ratio-inf")
    d_ter = cmp.difference("boundary", "terminal", "ratio-inf")
    below = d_imm.mean + 3 * d_imm.std_error < 0 and d_ter.mean + 3 * d_ter.std_error < 0
    ok = abs(z_imm) <= 3 and abs(z_bnd) <= 3 and below
    record(
        7,
        "Monte Carlo vs quadrature",
        ok,
        f"immediate {imm.mean:.4f} vs G {G:.4f} ({z_imm:+.2f} se); boundary {bnd.mean:.4f} vs V1 {V1:.4f} "
        f"({z_bnd:+.2f} se); boundary - immediate {d_imm.mean:.4f}, boundary - terminal {d_ter.mean:.4f}",
    )


# ---------------------------------------------------------------- 8 -----


def test_criterion_08_bang_bang():
    ok, parts = True, []
    for mu, best in ((0.6, "terminal"), (1.0, "terminal"), (0.2, "immediate"), (0.4, "immediate")):
        cmp = family(mu)
        w = extremal(cmp, best, "ratio-sup", "max")
        est = cmp.estimate(best, "ratio-sup")
        v2 = value_V2(ModelParams(mu, SIGMA, T)).value
        z = (est.mean - v2) / est.std_error
        good = w >= -1 and abs(z) <= 3
        ok &= good
        parts.append(f"mu={mu} {best} max (worst margin {w:+.1f} x 3se), V2 {z:+.2f} se")
    cmp = family(0.5)
    d = cmp.difference("immediate", "terminal", "ratio-sup")
    tie = abs(d.mean) <= 3 * d.std_error
    v2 = value_V2(ModelParams(0.5, SIGMA, T))
    zs = [
        (cmp.estimate(r, "ratio-sup").mean - v2.candidates[r]) / cmp.estimate(r, "ratio-sup").std_error
        for r in ("immediate", "terminal")
    ]
    tie &= all(abs(z) <= 3 for z in zs)
    ok &= tie
    parts.append(f"mu=0.5 tie: diff {d.mean:+.1e} ({d.mean / d.std_error:+.2f} se), V2 {zs[0]:+.2f}/{zs[1]:+.2f} se")
    record(8, "bang-bang supremum", ok, "; ".join(parts))


# ---------------------------------------------------------------- 9 -----


def test_criterion_09_infimum_extremes():
    ok, parts = True, []
    for mu, best in ((1.0, "terminal"), (1.5, "terminal"), (-0.5, "immediate"), (0.0, "immediate")):
        w = extremal(family(mu), best, "ratio-inf", "min")
        ok &= w >= -1
        parts.append(f"mu={mu} {best} min (worst margin {w:+.1f} x 3se)")
    record(9, "trivial rules optimal outside (0, sigma^2)", ok, "; ".join(parts))


# --------------------------------------------------------------- 10 -----

LAMBDAS = {
    "4.56": [-0.5, -0.25, 0.0, 0.5, 1.0],
    "4.57": [0.5, 1.0, 2.0],
    "4.58": [-2.0, -1.0, -0.5],
    "4.59": [-1.0, 0.0, 0.5],
}
# drift where the two sides coincide for every (t, x)
EDGE = {"4.56": -0.5, "4.57": 0.5, "4.58": -0.5, "4.59": 0.5}


def test_criterion_10_key_inequalities():
    points = [(t, x) for t in np.linspace(0.2, 1.0, 5) for x in np.linspace(0.0, 2.0, 5)]
    ok, parts = True, []
    for ineq, lams in LAMBDAS.items():
        rep = check_inequality(ineq, lams, points, method="joint")
        pts = np.array(rep.points)
        eq = np.isclose(pts[:, 0], EDGE[ineq])
        if ineq in ("4.56", "4.58"):
            eq |= pts[:, 2] == 0.0
        worst = rep.worst_margin
        eq_err = float(np.max(np.abs(rep.margins[eq])))
        good = worst >= -1e-6 and eq_err <= 1e-6
        ok &= good
        parts.append(f"{ineq}: min margin {worst:+.1e}, equality err {eq_err:.1e}")
    record(10, "key inequalities by quadrature", ok, "; ".join(parts))

