"""
Monte Carlo of selling rules and quadrature checks of the key inequalities
==========================================================================

Paths of ``Z_t = z0 exp(sigma B_t + (mu - sigma^2/2) t)`` are stepped exactly
in log space.  Within each step the maximum of the Brownian bridge between
the two endpoints is drawn by inversion, so the running maximum ``M`` is
exact at every grid time.

Every path owns a random substream derived from ``(seed, path index)``;
blocks of paths are simulated independently and results are concatenated in
path order, so estimates are bit-identical for any block size or worker
count.  Rules compared within one call see the same paths (common random
numbers).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .boundary import BoundaryCurve, QuadratureSpec, _joint_expectation, _simpson_unit, rbm_density
from .core import ModelParams, gain_tau
from .errors import DomainError, ResourceError

__all__ = [
    "SimConfig",
    "Ensemble",
    "Immediate",
    "Terminal",
    "FixedTime",
    "RatioThreshold",
    "BoundaryRatio",
    "McEstimate",
    "RuleComparison",
    "simulate_ensemble",
    "estimate_objective",
    "run_rules",
    "InequalityReport",
    "check_inequality",
    "default_rules",
    "OBJECTIVES",
]

OBJECTIVES = ("ratio-inf", "ratio-sup")


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    n_steps: int = 1000
    seed: int = 0
    bridge_max: bool = True
    z0: float = 1.0
    block_size: int = 4096
    memory_budget: int = 512 * 2**20

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise DomainError("n_paths and n_steps must be >= 1")
        if not self.z0 > 0:
            raise DomainError("z0 must be > 0")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.block_size < 1:
            raise DomainError("block_size must be >= 1")


@dataclass(frozen=True)
class Ensemble:
    """Log price and log running maximum on the time grid, one row per path."""

    params: ModelParams
    config: SimConfig
    times: np.ndarray
    log_z: np.ndarray
    log_m: np.ndarray

    def __post_init__(self):
        self.log_z.flags.writeable = False
        self.log_m.flags.writeable = False


def _path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _simulate_block(params: ModelParams, config: SimConfig, start: int, stop: int):
    K = config.n_steps
    dt = params.horizon / K
    n = stop - start
    xi = np.empty((n, K))
    u = np.empty((n, K))
    for row, i in enumerate(range(start, stop)):
        g = _path_rng(config.seed, i)
        xi[row] = g.standard_normal(K)
        u[row] = g.random(K)
    s = params.sigma
    steps = (params.mu - 0.5 * s * s) * dt + s * math.sqrt(dt) * xi
    log_z = np.empty((n, K + 1))
    log_z[:, 0] = math.log(config.z0)
    np.cumsum(steps, axis=1, out=log_z[:, 1:])
    log_z[:, 1:] += log_z[:, :1]
    if config.bridge_max:
        a, c = log_z[:, :-1], log_z[:, 1:]
        # maximum of a bridge from a to c with variance s^2 dt, using 1 - u in (0, 1]
        top = 0.5 * (a + c + np.sqrt((c - a) ** 2 - 2.0 * s * s * dt * np.log1p(-u)))
    else:
        top = log_z[:, 1:]
    log_m = np.empty_like(log_z)
    log_m[:, 0] = log_z[:, 0]
    log_m[:, 1:] = np.maximum.accumulate(np.maximum(top, log_z[:, :1]), axis=1)
    return log_z, log_m


def _check_budget(config: SimConfig, n_paths: int) -> None:
    need = 2 * 8 * n_paths * (config.n_steps + 1)
    if need > config.memory_budget:
        raise ResourceError(
            f"{need / 2**20:.0f} MiB needed for {n_paths} paths x {config.n_steps} steps, "
            f"budget is {config.memory_budget / 2**20:.0f} MiB; use run_rules for streaming"
        )


def simulate_ensemble(params: ModelParams, config: SimConfig) -> Ensemble:
    """Materialize all paths.  Raises ResourceError above ``config.memory_budget``."""
    _check_budget(config, config.n_paths)
    log_z, log_m = _simulate_block(params, config, 0, config.n_paths)
    times = np.linspace(0.0, params.horizon, config.n_steps + 1)
    return Ensemble(params, config, times, log_z, log_m)


# ------------------------------------------------------------------ rules --


@dataclass(frozen=True)
class Immediate:
    name: str = "immediate"

    def stop_index(self, times, log_z, log_m, params):
        return np.zeros(log_z.shape[0], dtype=int)


@dataclass(frozen=True)
class Terminal:
    name: str = "terminal"

    def stop_index(self, times, log_z, log_m, params):
        return np.full(log_z.shape[0], times.size - 1, dtype=int)


@dataclass(frozen=True)
class FixedTime:
    t: float

    @property
    def name(self) -> str:
        return f"fixed({self.t:g})"

    def stop_index(self, times, log_z, log_m, params):
        k = int(np.searchsorted(times, self.t - 1e-12))
        return np.full(log_z.shape[0], min(k, times.size - 1), dtype=int)


def _first_true(hit: np.ndarray) -> np.ndarray:
    # first column where hit is True, last column if never
    idx = np.argmax(hit, axis=1)
    idx[~hit.any(axis=1)] = hit.shape[1] - 1
    return idx


@dataclass(frozen=True)
class RatioThreshold:
    """Sell the first time ``M_t / Z_t >= c``."""

    c: float

    def __post_init__(self):
        if self.c < 1:
            raise DomainError("ratio threshold must be >= 1")

    @property
    def name(self) -> str:
        return f"ratio({self.c:g})"

    def stop_index(self, times, log_z, log_m, params):
        return _first_true(log_m - log_z >= math.log(self.c))


@dataclass(frozen=True)
class BoundaryRatio:
    """Sell the first grid time with ``M_t / Z_t >= exp(sigma b(t))``."""

    curve: BoundaryCurve
    name: str = "boundary"

    def stop_index(self, times, log_z, log_m, params):
        level = params.sigma * self.curve(times)
        return _first_true(log_m - log_z >= level[None, :])


def default_rules(params: ModelParams, curve: BoundaryCurve | None = None) -> list:
    """Immediate, FixedTime(T/2), RatioThreshold(1.2), the boundary rule if given, Terminal."""
    rules = [Immediate(), FixedTime(0.5 * params.horizon), RatioThreshold(1.2)]
    if curve is not None:
        rules.append(BoundaryRatio(curve))
    rules.append(Terminal())
    return rules


def _objective_values(log_z, log_m, idx, objective: str) -> np.ndarray:
    at_stop = log_z[np.arange(log_z.shape[0]), idx]
    if objective == "ratio-inf":
        return np.exp(log_m[:, -1] - at_stop)
    if objective == "ratio-sup":
        return np.exp(at_stop - log_m[:, -1])
    raise DomainError(f"objective must be one of {OBJECTIVES}")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int

    @classmethod
    def from_samples(cls, values: np.ndarray, seed: int) -> "McEstimate":
        n = values.size
        se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(float(values.mean()), se, n, seed)

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "n_paths": self.n_paths, "seed": self.seed}


def estimate_objective(ensemble: Ensemble, rule, objective: str) -> McEstimate:
    """Mean and standard error of the objective under ``rule`` on a materialized ensemble."""
    idx = rule.stop_index(ensemble.times, ensemble.log_z, ensemble.log_m, ensemble.params)
    vals = _objective_values(ensemble.log_z, ensemble.log_m, idx, objective)
    return McEstimate.from_samples(vals, ensemble.config.seed)


@dataclass
class RuleComparison:
    """Estimates of several rules on shared paths.

    ``samples[objective][rule]`` holds the per-path values in path order;
    pairwise differences use the per-path differences, so their standard
    error accounts for the common random numbers.
    """

    params: ModelParams
    config: SimConfig
    names: list
    samples: dict = field(repr=False)

    def estimate(self, rule: str, objective: str) -> McEstimate:
        return McEstimate.from_samples(self.samples[objective][rule], self.config.seed)

    def difference(self, a: str, b: str, objective: str) -> McEstimate:
        """Estimate of E(a) - E(b)."""
        return McEstimate.from_samples(self.samples[objective][a] - self.samples[objective][b], self.config.seed)

    def as_dict(self) -> dict:
        out = {}
        for obj, per_rule in self.samples.items():
            est = {r: self.estimate(r, obj).as_dict() for r in self.names}
            diffs = {}
            for i, a in enumerate(self.names):
                for b in self.names[i + 1 :]:
                    d = self.difference(a, b, obj)
                    diffs[f"{a} - {b}"] = {"mean": d.mean, "std_error": d.std_error}
            out[obj] = {"estimates": est, "differences": diffs}
        return out


def run_rules(
    params: ModelParams,
    config: SimConfig,
    rules: Sequence,
    objectives: Sequence[str] = ("ratio-inf",),
    workers: int = 1,
) -> RuleComparison:
    """Stream paths block by block and evaluate every rule on each block.

    Memory is bounded by one block per worker; results do not depend on
    ``workers`` or ``config.block_size``.
    """
    for obj in objectives:
        if obj not in OBJECTIVES:
            raise DomainError(f"objective must be one of {OBJECTIVES}")
    names = [r.name for r in rules]
    if len(set(names)) != len(names):
        raise DomainError(f"rule names must be distinct: {names}")
    _check_budget(config, min(config.block_size, config.n_paths) * max(1, workers))
    times = np.linspace(0.0, params.horizon, config.n_steps + 1)
    starts = list(range(0, config.n_paths, config.block_size))

    def block(start: int):
        stop = min(start + config.block_size, config.n_paths)
        log_z, log_m = _simulate_block(params, config, start, stop)
        out = {}
        for rule in rules:
            idx = rule.stop_index(times, log_z, log_m, params)
            for obj in objectives:
                out[(obj, rule.name)] = _objective_values(log_z, log_m, idx, obj)
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    samples = {
        obj: {name: np.concatenate([p[(obj, name)] for p in parts]) for name in names} for obj in objectives
    }
    return RuleComparison(params, config, names, samples)


# ----------------------------------------------------------- inequalities --

# id -> (lambda range, description)
_QUAD_IDS = {
    "4.56": ("ge", -0.5),
    "4.57": ("ge", 0.5),
    "4.58": ("le", -0.5),
    "4.59": ("le", 0.5),
}
_MC_IDS = {
    # id -> (objective, claimed optimal rule, direction, lambda condition in units of sigma)
    "4.2": ("ratio-sup", "terminal", "max", ("ge", 0.0)),
    "4.3": ("ratio-sup", "immediate", "max", ("le", 0.0)),
    "4.45": ("ratio-inf", "terminal", "min", ("ge", 0.5)),
    "4.46": ("ratio-inf", "immediate", "min", ("le", -0.5)),
}
INEQUALITY_IDS = tuple(_MC_IDS) + tuple(_QUAD_IDS)


@dataclass
class InequalityReport:
    """Margins of one inequality; ``margin >= -error_bound`` everywhere means pass.

    For the quadrature checks each row of ``points`` is ``(lam, t, x)``.  For
    the Monte Carlo checks it is ``(lam, rule index)`` against the claimed
    optimal rule.
    """

    id: str
    method: str
    points: list
    left: np.ndarray
    right: np.ndarray
    margins: np.ndarray
    error_bound: np.ndarray
    labels: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margins >= -self.error_bound))

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margins))

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "method": self.method,
            "points": [list(map(float, p)) if not isinstance(p, str) else p for p in self.points],
            "labels": list(self.labels),
            "left": np.asarray(self.left).tolist(),
            "right": np.asarray(self.right).tolist(),
            "margins": np.asarray(self.margins).tolist(),
            "error_bound": np.asarray(self.error_bound).tolist(),
            "passed": self.passed,
        }


def _in_range(cond, value: float) -> bool:
    kind, edge = cond
    return value >= edge if kind == "ge" else value <= edge


def _reflected_mean_exp(t: float, x: float, lam: float, sign: float, quad: QuadratureSpec, method: str) -> float:
    """E exp(sign (x v S_t - B_t)) under drift ``lam``, i.e. E exp(sign X^x_t)."""
    if t == 0:
        return math.exp(sign * x)
    if method == "joint":
        return _joint_expectation(lambda v: np.exp(sign * v), t, x, None, lam, quad, max(sign, 0.0))
    c = quad.trunc_c
    rt = math.sqrt(t)
    centre = x - lam * t
    lo = max(0.0, centre - c * rt - max(sign, 0.0) * t)
    hi = abs(centre) + c * rt + max(sign, 0.0) * t
    u, w = _simpson_unit(quad.s_panels)
    pts = lo + (hi - lo) * u
    return float((np.exp(sign * pts) * rbm_density(t, x, pts, lam)) @ w * (hi - lo))


_INEQ_QUAD = QuadratureSpec(s_panels=256, b_panels=256, trunc_c=10.0)


def _quad_sides(ineq: str, lam: float, t: float, x: float, quad: QuadratureSpec, method: str):
    """(larger side, smaller side) as claimed by the inequality, at sigma = 1."""
    if ineq in ("4.56", "4.58"):
        a = _reflected_mean_exp(t, x, lam, -1.0, quad, method)
        b = float(gain_tau(t, x, -1.0, -lam))
    else:
        a = float(gain_tau(t, x, 1.0, -lam))
        b = _reflected_mean_exp(t, x, lam, 1.0, quad, method)
    return (a, b) if ineq in ("4.56", "4.57") else (b, a)


def check_inequality(
    ineq: str,
    lambdas=None,
    points=None,
    *,
    method: str | None = None,
    quad: QuadratureSpec | None = None,
    floor: float = 1e-9,
    params: ModelParams | None = None,
    config: SimConfig | None = None,
    rules: Sequence | None = None,
    workers: int = 1,
) -> InequalityReport:
    """Evaluate one of the key inequalities.

    Quadrature inequalities (``4.56`` to ``4.59``, at ``sigma = 1``) take a
    list of ``lambdas`` and ``(t, x)`` points.  The expectation of the
    reflected process is computed twice, with ``quad`` and with doubled
    panels; the finer value is reported and the difference, plus ``floor``,
    is the error bound.  The other side is a closed form.

    Monte Carlo inequalities (``4.2``, ``4.3``, ``4.45``, ``4.46``) take
    ``params`` and a rule family run on common random numbers; the margin of
    each rule is measured against the claimed optimum with three paired
    standard errors as error bound.

    Raises
    ------
    DomainError
        If a drift lies outside the range where the inequality is claimed.
    """
    if ineq in _QUAD_IDS:
        method = method or "joint"
        quad = quad or _INEQ_QUAD
        fine = quad.refined()
        lambdas = [0.0] if lambdas is None else list(lambdas)
        if points is None:
            points = [(t, x) for t in np.linspace(0.2, 1.0, 5) for x in np.linspace(0.0, 2.0, 5)]
        for lam in lambdas:
            if not _in_range(_QUAD_IDS[ineq], lam):
                raise DomainError(f"inequality {ineq} is not claimed for lambda={lam}")
        rows, left, right, err = [], [], [], []
        for lam in lambdas:
            for t, x in points:
                if t < 0 or x < 0:
                    raise DomainError("points need t >= 0 and x >= 0")
                hi_c, lo_c = _quad_sides(ineq, lam, t, x, quad, method)
                hi_f, lo_f = _quad_sides(ineq, lam, t, x, fine, method)
                rows.append((lam, t, x))
                left.append(hi_f)
                right.append(lo_f)
                err.append(abs(hi_f - hi_c) + abs(lo_f - lo_c) + floor)
        left, right = np.array(left), np.array(right)
        return InequalityReport(ineq, "quadrature", rows, left, right, left - right, np.array(err))

    if ineq in _MC_IDS:
        if params is None:
            raise DomainError("Monte Carlo inequalities need model parameters")
        objective, best, direction, cond = _MC_IDS[ineq]
        if not _in_range(cond, params.lam / params.sigma):
            raise DomainError(f"inequality {ineq} is not claimed for lambda={params.lam}")
        config = config or SimConfig()
        rules = list(rules) if rules is not None else default_rules(params)
        cmp = run_rules(params, config, rules, (objective,), workers)
        others = [n for n in cmp.names if n != best]
        if best not in cmp.names:
            raise DomainError(f"rule family must contain {best!r}")
        left, right, margins, err = [], [], [], []
        for name in others:
            d = cmp.difference(best, name, objective)
            m = d.mean if direction == "max" else -d.mean
            left.append(cmp.estimate(best, objective).mean)
            right.append(cmp.estimate(name, objective).mean)
            margins.append(m)
            err.append(3.0 * d.std_error)
        return InequalityReport(
            ineq,
            "monte-carlo",
            [(params.lam, i) for i in range(len(others))],
            np.array(left),
            np.array(right),
            np.array(margins),
            np.array(err),
            labels=[f"{best} vs {n}" for n in others],
        )
    raise DomainError(f"unknown inequality id {ineq!r}; expected one of {INEQUALITY_IDS}")
