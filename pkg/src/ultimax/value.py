"""
Regimes, the value function and the two problem values
=======================================================

The infimum problem ``V1 = inf_tau E(M_T / Z_tau)`` reduces to stopping the
reflected process ``X`` with gain ``G``.  Its value function is

* ``G(t, x)`` when ``mu <= 0`` (sell at once),
* ``J(t, x)`` when ``mu >= sigma^2`` (hold to the horizon),
* ``J(t, x) - int_0^{T-t} K(t, x, s, b(t+s)) ds`` in between.

The supremum problem ``V2 = sup_tau E(Z_tau / M_T)`` is bang-bang with
threshold ``mu = sigma^2 / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .boundary import BoundaryCurve, QuadratureSpec, _J_transition, _K_rows, eval_J
from .core import ExponentSign, ModelParams, gain, gain_tau
from .errors import DomainError, MissingCurve

__all__ = [
    "InfimumRegime",
    "SupremumRegime",
    "classify_infimum",
    "classify_supremum",
    "value_infimum",
    "value_V1",
    "value_V2",
    "V1Result",
    "V2Result",
    "FBReport",
    "validate_fb_conditions",
]


class InfimumRegime(str, Enum):
    STOP_IMMEDIATELY = "StopImmediately"
    BOUNDARY = "Boundary"
    WAIT_UNTIL_END = "WaitUntilEnd"


class SupremumRegime(str, Enum):
    STOP_IMMEDIATELY = "StopImmediately"
    WAIT_UNTIL_END = "WaitUntilEnd"
    TIE = "Tie"


def classify_infimum(params: ModelParams) -> InfimumRegime:
    if params.mu <= 0.0:
        return InfimumRegime.STOP_IMMEDIATELY
    if params.mu >= params.sigma**2:
        return InfimumRegime.WAIT_UNTIL_END
    return InfimumRegime.BOUNDARY


def classify_supremum(params: ModelParams) -> SupremumRegime:
    half = 0.5 * params.sigma**2
    if params.mu < half:
        return SupremumRegime.STOP_IMMEDIATELY
    if params.mu > half:
        return SupremumRegime.WAIT_UNTIL_END
    return SupremumRegime.TIE


# ------------------------------------------------------- time quadrature --

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W

# the first panel is split geometrically so that the layer at s ~ (x - b)^2
# is resolved for x close to the boundary
_DYADIC_LEVELS = 36


def _time_nodes(t: float, curve: BoundaryCurve):
    """Nodes and weights in s for int_0^{T-t} ds over the curve's grid.

    Every grid panel after t gets 4-point Gauss-Legendre; the first panel
    [0, s1] is cut into dyadic pieces [s1 2^-(k+1), s1 2^-k].
    """
    T = curve.grid.horizon
    later = curve.grid.nodes[curve.grid.nodes > t + 1e-14]
    edges = np.concatenate(([0.0], later - t))
    edges[-1] = T - t
    s1 = edges[1]
    dy = s1 * 2.0 ** -np.arange(_DYADIC_LEVELS + 1)
    lo = np.concatenate((dy[1:], edges[1:-1]))
    hi = np.concatenate((dy[:-1], edges[2:]))
    width = hi - lo
    s = (lo[:, None] + width[:, None] * _GL_X[None, :]).ravel()
    w = (width[:, None] * _GL_W[None, :]).ravel()
    return s, w


def _boundary_integral(t: float, x: float, params: ModelParams, curve: BoundaryCurve, quad: QuadratureSpec) -> float:
    s, w = _time_nodes(t, curve)
    y = curve(np.minimum(t + s, params.horizon))
    return float(w @ _K_rows(t, x, s, y, params, quad))


def _check_point(t: float, x: float, params: ModelParams) -> None:
    if not (0.0 <= t <= params.horizon):
        raise DomainError(f"t={t} outside [0, {params.horizon}]")
    if x < 0:
        raise DomainError(f"x={x} must be >= 0")


def value_infimum(
    t: float,
    x: float,
    params: ModelParams,
    curve: BoundaryCurve | None = None,
    quad: QuadratureSpec | None = None,
) -> float:
    """Value function of the reduced infimum problem at (t, x).

    In the boundary regime the early-stopping integral is always evaluated,
    also above the boundary, where it reproduces ``G`` to quadrature accuracy.

    Raises
    ------
    MissingCurve
        In the boundary regime when no curve is given.
    """
    _check_point(t, x, params)
    regime = classify_infimum(params)
    if regime is InfimumRegime.STOP_IMMEDIATELY:
        return float(gain(t, x, params))
    if t >= params.horizon:
        return math.exp(params.sigma * x)
    quad = quad or (curve.quad if curve is not None else QuadratureSpec())
    J = _J_transition(t, x, params, quad)
    if regime is InfimumRegime.WAIT_UNTIL_END:
        return J
    if curve is None:
        raise MissingCurve("the boundary regime needs a solved boundary curve")
    if abs(curve.grid.horizon - params.horizon) > 1e-12:
        raise DomainError("curve grid does not cover [t, T]")
    return J - _boundary_integral(t, x, params, curve, quad)


@dataclass(frozen=True)
class V1Result:
    value: float
    regime: InfimumRegime
    times: np.ndarray | None = None
    threshold: np.ndarray | None = None

    def rule(self) -> str:
        if self.regime is InfimumRegime.STOP_IMMEDIATELY:
            return "sell at t=0"
        if self.regime is InfimumRegime.WAIT_UNTIL_END:
            return "sell at t=T"
        return "sell at the first t with M_t/Z_t >= exp(sigma b(t))"


def value_V1(params: ModelParams, curve: BoundaryCurve | None = None, quad: QuadratureSpec | None = None) -> V1Result:
    """V1 = V(0, 0) with the selling threshold for ``M_t / Z_t`` when it is time dependent."""
    regime = classify_infimum(params)
    v = value_infimum(0.0, 0.0, params, curve, quad)
    if regime is InfimumRegime.BOUNDARY:
        return V1Result(v, regime, curve.times.copy(), curve.threshold_ratio(curve.times))
    return V1Result(v, regime)


@dataclass(frozen=True)
class V2Result:
    value: float
    regime: SupremumRegime
    candidates: dict = field(default_factory=dict)


def _v2_stop_now(params: ModelParams) -> float:
    # E exp(-sigma S_T)
    return float(gain(0.0, 0.0, params, ExponentSign.MINUS))


def _v2_wait(params: ModelParams) -> float:
    # E exp(sigma (B_T - S_T)) and B - S has the law of -S under drift -lam
    return float(gain_tau(params.horizon, 0.0, -params.sigma, -params.lam))


def value_V2(params: ModelParams) -> V2Result:
    """V2 and the bang-bang regime; in a tie both candidate values are returned."""
    regime = classify_supremum(params)
    if regime is SupremumRegime.STOP_IMMEDIATELY:
        v = _v2_stop_now(params)
        return V2Result(v, regime, {"immediate": v})
    if regime is SupremumRegime.WAIT_UNTIL_END:
        v = _v2_wait(params)
        return V2Result(v, regime, {"terminal": v})
    a, b = _v2_stop_now(params), _v2_wait(params)
    if abs(a - b) > 1e-8 * max(1.0, abs(a)):
        raise ArithmeticError(f"tie candidates disagree: {a} vs {b}")
    return V2Result(a, regime, {"immediate": a, "terminal": b})


# ------------------------------------------------ free-boundary checks --


@dataclass
class FBReport:
    """Worst-case violations of the free-boundary conditions at sampled times.

    Slopes in ``smooth_fit`` are in units of ``sigma exp(sigma b(t))``.
    """

    times: np.ndarray
    pde_residual: float
    stopping_gap: float
    normal_reflection: float
    smooth_fit: float
    monotone_gap: float
    tolerances: dict
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.pde_residual <= self.tolerances["pde_residual"]
            and self.stopping_gap <= self.tolerances["stopping_gap"]
            and self.normal_reflection <= self.tolerances["normal_reflection"]
            and self.smooth_fit <= self.tolerances["smooth_fit"]
            and self.monotone_gap >= self.tolerances["monotone_gap"]
        )

    def as_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "pde_residual": self.pde_residual,
            "stopping_gap": self.stopping_gap,
            "normal_reflection": self.normal_reflection,
            "smooth_fit": self.smooth_fit,
            "monotone_gap": self.monotone_gap,
            "tolerances": dict(self.tolerances),
            "passed": self.passed,
            "detail": {k: np.asarray(v).tolist() for k, v in self.detail.items()},
        }


FB_TOLERANCES = {
    "pde_residual": 1e-2,
    "stopping_gap": 1e-3,
    "normal_reflection": 1e-3,
    "smooth_fit": 5e-3,
    "monotone_gap": -1e-6,
}


def validate_fb_conditions(
    params: ModelParams,
    curve: BoundaryCurve | None,
    quad: QuadratureSpec | None = None,
    times=None,
    dx: float = 1e-3,
    dt: float = 1e-4,
) -> FBReport:
    """Finite-difference checks of the free-boundary problem solved by V.

    At each sampled time: the backward equation below the boundary, ``V = G``
    above it, ``V_x(t, 0+) = 0`` and continuity of ``V_x`` across ``b(t)``.
    One-sided second-order stencils are used at ``x = 0`` and on each side of
    the boundary; central differences elsewhere.  Also reports the smallest
    increment of ``t -> V - G`` on the sampled times.
    """
    if curve is None:
        raise MissingCurve("free-boundary checks need a solved boundary curve")
    T = params.horizon
    times = np.linspace(0.05 * T, 0.95 * T, 10) if times is None else np.asarray(times, dtype=float)
    s = params.sigma
    lam = params.lam

    def V(t, x):
        return value_infimum(t, x, params, curve, quad)

    pde, gap, refl, fit = [], [], [], []
    for t in times:
        bt = float(curve(t))
        # backward equation at the middle of the continuation interval
        xm = 0.5 * bt
        if xm > 2 * dx:
            v0 = V(t, xm)
            vp, vm = V(t, xm + dx), V(t, xm - dx)
            vt = (V(t + dt, xm) - V(t - dt, xm)) / (2 * dt)
            vx = (vp - vm) / (2 * dx)
            vxx = (vp - 2 * v0 + vm) / dx**2
            pde.append(abs(vt - lam * vx + 0.5 * vxx))
        # stopping region
        xs = np.array([bt + 0.1, bt + 0.5])
        g = gain(t, xs, params)
        gap.append(max(abs(V(t, float(xi)) - float(gi)) / max(1.0, float(gi)) for xi, gi in zip(xs, g)))
        # normal reflection
        r0, r1, r2 = V(t, 0.0), V(t, dx), V(t, 2 * dx)
        refl.append(abs(-3 * r0 + 4 * r1 - r2) / (2 * dx))
        # smooth fit
        vb = V(t, bt)
        left = (3 * vb - 4 * V(t, bt - dx) + V(t, bt - 2 * dx)) / (2 * dx)
        right = (-3 * vb + 4 * V(t, bt + dx) - V(t, bt + 2 * dx)) / (2 * dx)
        fit.append(abs(right - left) / (s * math.exp(s * bt)))
    # t -> V - G nondecreasing at a few levels
    xs = np.linspace(0.0, 1.5 * float(curve.b_values[0]) + 0.1, 4)
    inc = np.inf
    for x in xs:
        d = [V(float(t), float(x)) - float(gain(t, x, params)) for t in times]
        inc = min(inc, float(np.min(np.diff(d))))
    return FBReport(
        times=times,
        pde_residual=max(pde) if pde else 0.0,
        stopping_gap=max(gap),
        normal_reflection=max(refl),
        smooth_fit=max(fit),
        monotone_gap=inc,
        tolerances=dict(FB_TOLERANCES),
        detail={"pde": pde, "stopping": gap, "reflection": refl, "smooth_fit": fit},
    )
