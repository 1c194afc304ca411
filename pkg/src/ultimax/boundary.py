"""
Optimal stopping boundary of the infimum problem
================================================

The boundary ``b`` solves, for every ``t`` in ``[0, T]``,

    J(t, b(t)) = G(t, b(t)) + int_0^{T-t} K(t, b(t), s, b(t+s)) ds

with ``J(t, x) = E_{t,x} G(T, X_T)`` and
``K(t, x, r, y) = E_{t,x} H(t+r, X_{t+r}) 1(X_{t+r} > y)``, where
``X^x = x v S^lam - B^lam`` is Brownian motion with drift ``-lam`` reflected
at zero.  The equation is solved backward in time on a grid: at each node
the unknown ``b(t_i)`` is the root of a scalar function built from the
already-computed values ``b(t_j)``, ``j > i``.

``J`` and ``K`` are available through two independent routes:

* ``method="joint"``: tensor-product Simpson quadrature against the joint
  density of ``(B^lam, S^lam)``;
* ``method="transition"``: one-dimensional Simpson quadrature against the
  transition density of the reflected process.  The solver uses this route
  because it is two orders of magnitude cheaper.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_ndtr, ndtr

from .core import (
    ModelParams,
    _drift_H_tau,
    _drift_H_terminal,
    _require_boundary_regime,
    gain,
    h_curve,
    joint_density,
)
from .errors import BracketError, DomainError

log = logging.getLogger(__name__)

__all__ = [
    "TimeGrid",
    "QuadratureSpec",
    "BoundaryCurve",
    "ResidualStats",
    "rbm_density",
    "eval_J",
    "eval_K",
    "solve_boundary",
    "boundary_residual",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time nodes from 0 to the horizon."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise DomainError("a time grid needs at least 2 steps")
        if nodes[0] != 0.0:
            raise DomainError("the first grid node must be 0")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, horizon: float, n_steps: int) -> "TimeGrid":
        if n_steps < 2:
            raise DomainError("n_steps must be >= 2")
        return cls(np.linspace(0.0, horizon, n_steps + 1))

    @property
    def n_steps(self) -> int:
        return self.nodes.size - 1

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    def refined(self) -> "TimeGrid":
        """Grid with the midpoint of every step inserted."""
        mids = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        out = np.empty(2 * self.nodes.size - 1)
        out[0::2] = self.nodes
        out[1::2] = mids
        return TimeGrid(out)


@dataclass(frozen=True)
class QuadratureSpec:
    """Panel counts and tail truncation (in standard deviations) for J and K."""

    s_panels: int = 64
    b_panels: int = 64
    trunc_c: float = 8.0

    def __post_init__(self):
        if self.s_panels < 4 or self.b_panels < 4:
            raise DomainError("panel counts must be >= 4")
        if self.trunc_c < 4:
            raise DomainError("trunc_c must be >= 4")

    def refined(self) -> "QuadratureSpec":
        return replace(self, s_panels=2 * self.s_panels, b_panels=2 * self.b_panels)


@dataclass
class BoundaryCurve:
    """Solved boundary with the zero curve of H and per-node residuals."""

    params: ModelParams
    grid: TimeGrid
    b_values: np.ndarray
    h_values: np.ndarray
    residuals: np.ndarray
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    root_tol: float = 1e-8
    clamped: list = field(default_factory=list)
    pinned_to_h: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def __call__(self, t):
        """Boundary at arbitrary times, linear between nodes."""
        return np.interp(t, self.grid.nodes, self.b_values)

    def threshold_ratio(self, t):
        """Selling threshold for ``M_t / Z_t``: ``exp(sigma b(t))``."""
        return np.exp(self.params.sigma * self(t))

    def config(self) -> dict:
        return {
            "n_steps": self.grid.n_steps,
            "s_panels": self.quad.s_panels,
            "b_panels": self.quad.b_panels,
            "trunc_c": self.quad.trunc_c,
            "root_tol": self.root_tol,
            "clamped_nodes": list(self.clamped),
            "nodes_pinned_to_h": list(self.pinned_to_h),
        }


# ------------------------------------------------------------- quadrature --


def _simpson_unit(n_panels: int):
    """Nodes and weights of composite Simpson on [0, 1] with ``n_panels`` panels."""
    u = np.linspace(0.0, 1.0, 2 * n_panels + 1)
    w = np.full(u.size, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return u, w / (6.0 * n_panels)


def rbm_density(r, x, w, lam: float):
    """Transition density of ``X^x_r = x v S^lam_r - B^lam_r`` at ``w >= 0``.

    This is Brownian motion with drift ``-lam`` started at ``x`` and
    reflected at zero.
    """
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    rt = np.sqrt(r)
    a1 = (w - x + lam * r) / rt
    a2 = (w + x - lam * r) / rt
    a3 = (-w - x + lam * r) / rt
    out = (np.exp(-0.5 * a1 * a1) + np.exp(-2.0 * lam * w - 0.5 * a2 * a2)) / (_SQRT_2PI * rt)
    return out + 2.0 * lam * np.exp(-2.0 * lam * w + log_ndtr(a3))


def _transition_expectation(func, r, x, y, lam: float, quad: QuadratureSpec, tilt: float):
    """Row-wise E[func(X^x_r) 1(X^x_r > y)] for arrays ``r``, ``y`` of equal length.

    ``func`` receives an (m, k) array of states, row i belonging to ``r[i]``.
    ``tilt`` is the exponential growth rate of ``func``; it widens the
    truncated range so the tilted mass is still covered.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    y = np.broadcast_to(np.asarray(y, dtype=float), r.shape)
    x = np.broadcast_to(np.asarray(x, dtype=float), r.shape)
    c = quad.trunc_c
    rt = np.sqrt(r)
    centre = x - lam * r
    lo = np.maximum(y, np.maximum(0.0, centre - c * rt - tilt * r))
    hi = np.abs(centre) + c * rt + tilt * r
    length = np.maximum(hi - lo, 0.0)
    u, wts = _simpson_unit(quad.s_panels)
    pts = lo[:, None] + length[:, None] * u[None, :]
    vals = func(pts) * rbm_density(r[:, None], x[:, None], pts, lam)
    return (vals @ wts) * length


def _joint_expectation(func, r: float, x: float, y, lam: float, quad: QuadratureSpec, tilt: float) -> float:
    """E[func(x v S_r - B_r) 1(x v S_r - B_r > y)] by 2D Simpson against the joint density.

    The s-range is split where the integrand has kinks (``s = x``) or where
    the upper b-limit switches branch (``s = x - y``), so every piece is
    smooth.  ``y=None`` drops the indicator.
    """
    c = quad.trunc_c
    rt = math.sqrt(r)
    s_hi = max(0.0, lam) * r + c * rt + tilt * r
    b_lo = lam * r - c * rt - tilt * r
    cuts = {0.0, s_hi}
    if 0.0 < x < s_hi:
        cuts.add(x)
    if y is not None and 0.0 < x - y < s_hi:
        cuts.add(x - y)
    cuts = sorted(cuts)
    us, ws = _simpson_unit(quad.s_panels)
    ub, wb = _simpson_unit(quad.b_panels)
    total = 0.0
    for sa, sb in zip(cuts[:-1], cuts[1:]):
        s = sa + (sb - sa) * us
        top = np.maximum(x, s)
        b_up = s if y is None else np.minimum(s, top - y)
        base = np.minimum(b_lo, b_up)
        length = b_up - base
        b = np.minimum(base[:, None] + length[:, None] * ub[None, :], b_up[:, None])
        vals = func(top[:, None] - b) * joint_density(r, b, s[:, None], lam)
        inner = (vals @ wb) * length
        total += (sb - sa) * float(inner @ ws)
    return total


def _check_method(method: str) -> None:
    if method not in ("joint", "transition"):
        raise DomainError(f"unknown quadrature method {method!r}")


def eval_J(t: float, x: float, params: ModelParams, quad: QuadratureSpec | None = None, method: str = "joint") -> float:
    """J(t, x) = E_{t,x} exp(sigma X_T): the value of waiting until the horizon."""
    quad = quad or QuadratureSpec()
    _check_method(method)
    T, s = params.horizon, params.sigma
    if not (0.0 <= t <= T) or x < 0:
        raise DomainError(f"(t, x) = ({t}, {x}) outside [0, {T}] x [0, inf)")
    if t == T:
        return math.exp(s * x)
    tau = T - t
    if method == "joint":
        return _joint_expectation(lambda v: np.exp(s * v), tau, x, None, params.lam, quad, s)
    return float(_transition_expectation(lambda v: np.exp(s * v), tau, x, 0.0, params.lam, quad, s)[0])


def _H_rows(times, w, params: ModelParams):
    """H(times[i], w[i, :]) with the terminal limit on rows where times == T."""
    tau = params.horizon - np.asarray(times, dtype=float)
    out = np.empty(w.shape)
    live = tau > 0
    if np.any(live):
        out[live] = _drift_H_tau(tau[live][:, None], w[live], params.sigma, params.lam)
    if np.any(~live):
        out[~live] = _drift_H_terminal(w[~live], params.sigma, params.lam)
    return out


def _H_tilt(params: ModelParams) -> float:
    return params.sigma + 2.0 * max(params.lam, 0.0)


def eval_K(t: float, x: float, r: float, y: float, params: ModelParams, quad: QuadratureSpec | None = None, method: str = "joint") -> float:
    """K(t, x, r, y) = E_{t,x} H(t+r, X_{t+r}) 1(X_{t+r} > y) for ``r > 0``."""
    quad = quad or QuadratureSpec()
    _check_method(method)
    T = params.horizon
    if not (0.0 <= t <= T) or x < 0 or y < 0:
        raise DomainError("eval_K requires 0 <= t <= T, x >= 0, y >= 0")
    if not (0.0 < r <= T - t + 1e-14):
        raise DomainError(f"r={r} outside (0, T - t]")
    u = min(t + r, T)
    if method == "joint":

        def func(v):
            return _H_rows(np.full(v.shape[0], u), v, params)

        return _joint_expectation(func, r, x, y, params.lam, quad, _H_tilt(params))
    return float(_K_rows(t, x, np.array([r]), np.array([y]), params, quad)[0])


def k_limit(t: float, x: float, y: float, params: ModelParams) -> float:
    """Limit of K(t, x, r, y(r)) as r -> 0 with y(r) -> y.

    ``H(t, x)`` when ``x > y``, zero when ``x < y`` and ``H(t, x) / 2`` on the
    diagonal, where the reflected process starts exactly on the level.
    """
    if x > y:
        weight = 1.0
    elif x < y:
        weight = 0.0
    else:
        weight = 0.5
    if weight == 0.0:
        return 0.0
    return weight * float(_H_rows(np.array([t]), np.array([[x]]), params)[0, 0])


def _K_rows(t: float, x, r, y, params: ModelParams, quad: QuadratureSpec):
    """Vector of K(t, x, r_j, y_j) through the transition density."""
    u = np.minimum(t + np.asarray(r, dtype=float), params.horizon)

    def func(v):
        return _H_rows(u, v, params)

    return _transition_expectation(func, r, x, y, params.lam, quad, _H_tilt(params))


def _J_transition(t: float, x: float, params: ModelParams, quad: QuadratureSpec) -> float:
    if t >= params.horizon:
        return math.exp(params.sigma * x)
    s = params.sigma
    return float(
        _transition_expectation(lambda v: np.exp(s * v), params.horizon - t, x, 0.0, params.lam, quad, s)[0]
    )


def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    d = np.diff(nodes)
    w = np.zeros(nodes.size)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


# ----------------------------------------------------------------- solver --


def _volterra_function(i: int, nodes: np.ndarray, b_future: np.ndarray, params: ModelParams, quad: QuadratureSpec):
    """z -> J - G - trapezoid(K) at node i given b at nodes i+1..n.

    The s = 0 term is the diagonal limit H(t_i, z)/2, since the level there is
    the unknown b(t_i) = z itself.
    """
    ti = float(nodes[i])
    w = _trapezoid_weights(nodes[i:] - ti)
    r = nodes[i + 1 :] - ti
    w0, wr = w[0], w[1:]

    def F(z: float) -> float:
        J = _J_transition(ti, z, params, quad)
        G = float(gain(ti, z, params))
        K = _K_rows(ti, z, r, b_future, params, quad)
        return J - G - w0 * k_limit(ti, z, z, params) - float(wr @ K)

    return F


def solve_boundary(
    params: ModelParams,
    grid: TimeGrid | None = None,
    quad: QuadratureSpec | None = None,
    root_tol: float = 1e-8,
) -> BoundaryCurve:
    """Solve the Volterra equation for the optimal boundary, backward from ``b(T) = 0``.

    Each node's root is bracketed in ``[h(t_i), max(b(t_{i+1}), h(t_i)) + 2]``;
    the upper end grows geometrically up to ``64 / sigma``.  A root that falls
    below ``b(t_{i+1})`` by more than ``root_tol`` is clamped to it (the
    boundary is nonincreasing) and the node is reported in ``clamped``.

    Raises
    ------
    RegimeError
        If ``mu`` is outside ``(0, sigma^2)``.
    BracketError
        If no sign change is found below the growth cap.
    """
    _require_boundary_regime(params)
    quad = quad or QuadratureSpec()
    grid = grid or TimeGrid.uniform(params.horizon, 200)
    if abs(grid.horizon - params.horizon) > 1e-12:
        raise DomainError("grid must end at the model horizon")
    nodes = grid.nodes
    n = grid.n_steps
    cap = 64.0 / params.sigma
    h = np.array([h_curve(float(ti), params) for ti in nodes])
    b = np.zeros(n + 1)
    res = np.zeros(n + 1)
    clamped, pinned = [], []
    for i in range(n - 1, -1, -1):
        F = _volterra_function(i, nodes, b[i + 1 :], params, quad)
        lo = h[i]
        f_lo = F(lo)
        if f_lo >= 0:
            # no continuation region above h at this node
            root = lo
            pinned.append(i)
        else:
            width = max(b[i + 1], lo) + 2.0 - lo
            hi = lo + width
            while F(hi) <= 0:
                width *= 2.0
                hi = lo + width
                if hi > cap:
                    raise BracketError(f"no root of the Volterra function at t={nodes[i]} below {cap}")
            root = brentq(F, lo, hi, xtol=root_tol, rtol=4 * np.finfo(float).eps)
        if root < b[i + 1] - root_tol:
            log.warning("clamping b(t=%g) from %g to %g", nodes[i], root, b[i + 1])
            clamped.append(i)
            root = b[i + 1]
        b[i] = root
        res[i] = F(root)
    return BoundaryCurve(
        params=params,
        grid=grid,
        b_values=b,
        h_values=h,
        residuals=res,
        quad=quad,
        root_tol=root_tol,
        clamped=sorted(clamped),
        pinned_to_h=sorted(pinned),
    )


@dataclass(frozen=True)
class ResidualStats:
    max: float
    mean: float
    per_node: np.ndarray


def boundary_residual(curve: BoundaryCurve, params: ModelParams | None = None, quad: QuadratureSpec | None = None) -> ResidualStats:
    """Volterra residual of ``curve`` under a refined discretization.

    Panels are doubled and a midpoint is inserted in every time step, with
    ``b`` interpolated linearly there.  Residuals are reported relative to
    ``max(1, G(t, b(t)))``.
    """
    params = params or curve.params
    quad = (quad or curve.quad).refined()
    fine = curve.grid.refined().nodes
    b_fine = curve(fine)
    n = curve.grid.n_steps
    rel = np.zeros(n + 1)
    for i in range(n):
        k = 2 * i
        z = float(curve.b_values[i])
        F = _volterra_function(k, fine, b_fine[k + 1 :], params, quad)
        rel[i] = abs(F(z)) / max(1.0, float(gain(fine[k], z, params)))
    return ResidualStats(max=float(rel.max()), mean=float(rel.mean()), per_node=rel)
