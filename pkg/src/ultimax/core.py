"""
Closed-form primitives for the running maximum of Brownian motion with drift
===========================================================================

The stock follows ``Z_t = Z_0 exp(sigma B_t + (mu - sigma^2/2) t)``.  Writing
``B^lam_t = B_t + lam t`` with ``lam = (mu - sigma^2/2)/sigma`` and
``S^lam_t = max_{s<=t} B^lam_s``, every expectation of interest reduces to
the law of ``S^lam`` or the joint law of ``(B^lam, S^lam)``.  This module
houses those laws and the functions built from them:

* ``gain``      G(t, x)  = E exp(sig' (x v S^lam_{T-t})),  sig' = +-sigma
* ``gain_dx``   dG/dx
* ``drift_H``   H = G_t - lam G_x + G_xx / 2
* ``h_curve``   the level where H(t, .) changes sign

All functions are pure and accept numpy arrays where noted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import BracketError, DomainError, RegimeError

__all__ = [
    "ModelParams",
    "ExponentSign",
    "StateTimePoint",
    "SING_EPS",
    "std_normal_cdf",
    "std_normal_pdf",
    "max_cdf",
    "max_sf",
    "joint_density",
    "gain",
    "gain_integral",
    "gain_tau",
    "gain_dx",
    "drift_H",
    "drift_H_dt",
    "h_curve",
]

# |sig' + 2 lam| below this switches G and H to their singular-case forms.
SING_EPS = 1e-8

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ModelParams:
    """Drift ``mu``, volatility ``sigma`` and horizon ``T`` of the stock."""

    mu: float
    sigma: float
    horizon: float = 1.0

    def __post_init__(self):
        for name in ("mu", "sigma", "horizon"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if self.horizon <= 0:
            raise DomainError(f"horizon must be > 0, got {self.horizon}")

    @property
    def lam(self) -> float:
        """Drift of the driving Brownian motion, ``(mu - sigma^2/2) / sigma``."""
        return (self.mu - 0.5 * self.sigma**2) / self.sigma

    @classmethod
    def from_lambda(cls, lam: float, sigma: float = 1.0, horizon: float = 1.0) -> "ModelParams":
        return cls(mu=sigma * lam + 0.5 * sigma**2, sigma=sigma, horizon=horizon)

    def as_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma, "horizon": self.horizon, "lambda": self.lam}


class ExponentSign(IntEnum):
    """Sign of the exponent in the gain function.

    ``PLUS`` gives the infimum problem E(M_T/Z_tau); ``MINUS`` replaces sigma
    by -sigma and gives the supremum problem E(Z_tau/M_T).
    """

    PLUS = 1
    MINUS = -1


@dataclass(frozen=True)
class StateTimePoint:
    t: float
    x: float

    def check(self, params: ModelParams) -> None:
        if not (0.0 <= self.t <= params.horizon):
            raise DomainError(f"t={self.t} outside [0, {params.horizon}]")
        if self.x < 0:
            raise DomainError(f"x={self.x} must be >= 0")


def _sign(sign) -> int:
    s = int(sign)
    if s not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign!r}")
    return s


def _scalar_or_array(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


# ---------------------------------------------------------------- normals --


def std_normal_cdf(z):
    """Standard normal distribution function (relative accuracy ~1e-16)."""
    return ndtr(z)


def std_normal_pdf(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / _SQRT_2PI


# ------------------------------------------------------ maximum of B^lam --


def max_cdf(t, x, lam: float):
    """P(S^lam_t <= x) for the running maximum of Brownian motion with drift ``lam``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    scalar = t.ndim == 0 and x.ndim == 0
    if np.any(t <= 0):
        raise DomainError("max_cdf requires t > 0")
    if np.any(x < 0):
        raise DomainError("max_cdf requires x >= 0")
    rt = np.sqrt(t)
    out = ndtr((x - lam * t) / rt) - np.exp(2.0 * lam * x + log_ndtr((-x - lam * t) / rt))
    return _scalar_or_array(np.clip(out, 0.0, 1.0), scalar)


def max_sf(t, x, lam: float):
    """P(S^lam_t > x), computed without cancellation."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    scalar = t.ndim == 0 and x.ndim == 0
    rt = np.sqrt(t)
    out = ndtr((lam * t - x) / rt) + np.exp(2.0 * lam * x + log_ndtr((-x - lam * t) / rt))
    return _scalar_or_array(np.clip(out, 0.0, 1.0), scalar)


def joint_density(r, b, s, lam: float):
    """Joint density of ``(B^lam_r, S^lam_r)`` at endpoint ``b`` and maximum ``s``."""
    r = np.asarray(r, dtype=float)
    b = np.asarray(b, dtype=float)
    s = np.asarray(s, dtype=float)
    scalar = r.ndim == 0 and b.ndim == 0 and s.ndim == 0
    if np.any(r <= 0):
        raise DomainError("joint_density requires r > 0")
    if np.any(s < 0) or np.any(b > s):
        raise DomainError("joint_density requires s >= 0 and b <= s")
    u = 2.0 * s - b
    out = (
        math.sqrt(2.0 / math.pi)
        * u
        / r**1.5
        * np.exp(-(u * u) / (2.0 * r) + lam * (b - 0.5 * lam * r))
    )
    return _scalar_or_array(out, scalar)


# ---------------------------------------------------------- gain function --


def _gain_generic(tau, x, sp: float, lam: float):
    rt = np.sqrt(tau)
    k = sp + 2.0 * lam
    a = 2.0 * (sp + lam) / k * np.exp(0.5 * sp * k * tau + log_ndtr((-x + (lam + sp) * tau) / rt))
    c = np.exp(sp * x) * ndtr((x - lam * tau) / rt)
    d = sp / k * np.exp(k * x + log_ndtr((-x - lam * tau) / rt))
    return a + c - d


def _gain_critical(tau, x, sp: float):
    # lam = -sp/2: the (sp + 2 lam) denominators of the generic form vanish
    rt = np.sqrt(tau)
    return (
        sp * rt * std_normal_pdf((x - 0.5 * sp * tau) / rt)
        + np.exp(sp * x) * ndtr((x + 0.5 * sp * tau) / rt)
        + (1.0 - sp * x + 0.5 * sp * sp * tau) * ndtr((-x + 0.5 * sp * tau) / rt)
    )


def _simpson(f, a: float, b: float, n: int) -> float:
    y = f(np.linspace(a, b, 2 * n + 1))
    h = (b - a) / (2 * n)
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def _gain_by_integral(tau: float, x: float, sp: float, lam: float, tol: float = 1e-10) -> float:
    """exp(sp x) + sp * int_x^inf exp(sp y) P(S_tau >= y) dy by panel-doubling Simpson."""
    base = math.exp(sp * x)
    if tau == 0.0:
        return base

    def f(y):
        return sp * np.exp(sp * y) * max_sf(tau, y, lam)

    rt = math.sqrt(tau)
    # the integrand peaks near (lam + sp) tau; walk past it until it is negligible
    past_peak = max(x, (lam + sp) * tau, lam * tau)
    hi, step, peak = x + rt, rt, abs(float(f(x)))
    while True:
        v = abs(float(f(hi)))
        peak = max(peak, v)
        if hi > past_peak and v < 1e-16 * max(abs(base), peak * rt, 1e-300):
            break
        hi += step
        step *= 1.25
    n = 32
    coarse = _simpson(f, x, hi, n)
    while True:
        n *= 2
        fine = _simpson(f, x, hi, n)
        if abs(fine - coarse) < 15.0 * tol or n >= 1 << 20:
            return base + fine + (fine - coarse) / 15.0
        coarse = fine


def _check_tx(t, x, horizon: float, allow_terminal: bool = True):
    if np.any(t < 0) or np.any(t > horizon):
        raise DomainError(f"t must lie in [0, {horizon}]")
    if not allow_terminal and np.any(t >= horizon):
        raise DomainError("t must be < horizon")
    if np.any(x < 0):
        raise DomainError("x must be >= 0")


def _gain_tau(tau, x, sp: float, lam: float):
    """Gain on broadcastable arrays of remaining time ``tau >= 0`` (no validation)."""
    tau, x = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(x, dtype=float))
    out = np.array(np.exp(sp * x), dtype=float)
    live = tau > 0
    if np.any(live):
        if abs(sp + 2.0 * lam) >= SING_EPS:
            out[live] = _gain_generic(tau[live], x[live], sp, lam)
        elif sp > 0:
            out[live] = _gain_critical(tau[live], x[live], sp)
        else:
            out[live] = [
                _gain_by_integral(float(a), float(b), sp, lam) for a, b in zip(tau[live], x[live])
            ]
    return out


def gain(t, x, params: ModelParams, sign=ExponentSign.PLUS):
    """G(t, x) = E exp(sig' (x v S^lam_{T-t})) with ``sig' = sign * sigma``.

    Closed form in the generic case; at ``mu = 0`` (sign +1) the form without
    the ``sigma + 2 lam`` denominators.  The remaining singular case
    (sign -1 with ``mu = sigma^2``) falls back to the integral representation.
    At ``t = T`` returns ``exp(sig' x)``.
    """
    sp = _sign(sign) * params.sigma
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    scalar = t.ndim == 0 and x.ndim == 0
    _check_tx(t, x, params.horizon)
    return _scalar_or_array(_gain_tau(params.horizon - t, x, sp, params.lam), scalar)


def gain_integral(t: float, x: float, params: ModelParams, sign=ExponentSign.PLUS, tol: float = 1e-10) -> float:
    """Gain function evaluated through its integral representation (scalar only).

    Independent of the closed forms used by :func:`gain`; used as its oracle.
    """
    sp = _sign(sign) * params.sigma
    _check_tx(np.asarray(t), np.asarray(x), params.horizon)
    return _gain_by_integral(params.horizon - float(t), float(x), sp, params.lam, tol)


def gain_tau(tau, x, sp: float, lam: float):
    """E exp(sp (x v S^lam_tau)) for raw exponent ``sp`` and drift ``lam``."""
    tau = np.asarray(tau, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(tau < 0) or np.any(x < 0):
        raise DomainError("gain_tau requires tau >= 0 and x >= 0")
    return _scalar_or_array(_gain_tau(tau, x, sp, lam), tau.ndim == 0 and x.ndim == 0)


def gain_dx(t, x, params: ModelParams, sign=ExponentSign.PLUS):
    """dG/dx = sig' exp(sig' x) P(S^lam_{T-t} <= x); zero at x = 0."""
    sp = _sign(sign) * params.sigma
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_tx(t, x, params.horizon, allow_terminal=False)
    scalar = t.ndim == 0 and x.ndim == 0
    out = sp * np.exp(sp * x) * max_cdf(params.horizon - t, x, params.lam)
    return _scalar_or_array(np.asarray(out, dtype=float), scalar)


# --------------------------------------------------------- drift function --


def _drift_H_tau(tau, x, sp: float, lam: float):
    """H on arrays with tau > 0 (no validation)."""
    rt = np.sqrt(tau)
    if abs(sp + 2.0 * lam) < SING_EPS:
        return sp * sp * (
            np.exp(sp * x) * ndtr((x + 0.5 * sp * tau) / rt) - ndtr((-x + 0.5 * sp * tau) / rt)
        )
    k = sp + 2.0 * lam
    return (
        0.5 * sp * (sp - 2.0 * lam) * np.exp(sp * x) * ndtr((x - lam * tau) / rt)
        - 0.5 * sp * sp * np.exp(k * x + log_ndtr((-x - lam * tau) / rt))
        - sp * (sp + lam) * np.exp(0.5 * sp * k * tau + log_ndtr((-x + (sp + lam) * tau) / rt))
    )


def _drift_H_terminal(x, sp: float, lam: float):
    # tau -> 0 at fixed x: the normal cdfs tend to indicators, or 1/2 at x = 0
    pos = x > 0
    p1 = np.where(pos, 1.0, 0.5)
    p2 = np.where(pos, 0.0, 0.5)
    return (
        0.5 * sp * (sp - 2.0 * lam) * np.exp(sp * x) * p1
        - 0.5 * sp * sp * np.exp((sp + 2.0 * lam) * x) * p2
        - sp * (sp + lam) * p2
    )


def drift_H(t, x, params: ModelParams, sign=ExponentSign.PLUS):
    """H = G_t - lam G_x + G_xx/2 in closed form.

    At ``t = T`` the pointwise limit at fixed ``x`` is returned.
    """
    sp = _sign(sign) * params.sigma
    lam = params.lam
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    scalar = t.ndim == 0 and x.ndim == 0
    _check_tx(t, x, params.horizon)
    t, x = np.broadcast_arrays(t, x)
    tau = params.horizon - t
    out = np.empty(tau.shape)
    live = tau > 0
    out[live] = _drift_H_tau(tau[live], x[live], sp, lam)
    out[~live] = _drift_H_terminal(x[~live], sp, lam)
    return _scalar_or_array(out, scalar)


def _require_boundary_regime(params: ModelParams) -> None:
    if not (0.0 < params.mu < params.sigma**2):
        regime = "StopImmediately" if params.mu <= 0 else "WaitUntilEnd"
        raise RegimeError(
            f"mu={params.mu} is outside (0, sigma^2) = (0, {params.sigma**2}); regime is {regime}",
            regime=regime,
        )


def drift_H_dt(t, x, params: ModelParams):
    """Time derivative of H (sign +1), nonnegative when 0 < mu < sigma^2."""
    _require_boundary_regime(params)
    s, lam = params.sigma, params.lam
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_tx(t, x, params.horizon, allow_terminal=False)
    scalar = t.ndim == 0 and x.ndim == 0
    tau = params.horizon - t
    rt = np.sqrt(tau)
    k = s + 2.0 * lam
    out = 0.5 * s * s * np.exp(s * x) * (2.0 * x + k * tau) / tau**1.5 * std_normal_pdf(
        (x - lam * tau) / rt
    ) + 0.5 * s * s * (s + lam) * k * np.exp(0.5 * s * k * tau + log_ndtr((-x + (s + lam) * tau) / rt))
    return _scalar_or_array(np.asarray(out, dtype=float), scalar)


def h_curve(t: float, params: ModelParams, sign=ExponentSign.PLUS, tol: float = 1e-10) -> float:
    """Root in x of H(t, .) = 0, found by bisection.

    Below the root H < 0, above it H >= 0.  Defined only for
    ``0 < mu < sigma^2``.  Returns 0 at ``t = T`` and wherever ``H(t, 0) >= 0``.
    """
    _require_boundary_regime(params)
    sign = _sign(sign)
    if not (0.0 <= t <= params.horizon):
        raise DomainError(f"t={t} outside [0, {params.horizon}]")
    if t >= params.horizon:
        return 0.0
    sp, lam, tau = sign * params.sigma, params.lam, params.horizon - t

    def H(x):
        return float(_drift_H_tau(np.asarray(tau), np.asarray(x, dtype=float), sp, lam))

    if H(0.0) >= 0:
        return 0.0
    cap = 64.0 / params.sigma
    lo, hi = 0.0, 1.0
    while H(hi) <= 0:
        lo, hi = hi, 2.0 * hi
        if hi > cap:
            raise BracketError(f"no sign change of H(t={t}, .) below x={cap}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if H(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
