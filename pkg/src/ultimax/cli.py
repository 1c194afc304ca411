"""
Command-line front end
======================

Subcommands ``regime``, ``boundary``, ``value``, ``simulate`` and ``verify``
share the model and numerics flags.  Settings are resolved as command line,
then a flat ``key = value`` config file (``--config``), then built-in
defaults.

Exit codes: 0 success, 2 usage or domain error, 3 regime mismatch,
4 verification or solver failure, 5 resource limit.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .boundary import BoundaryCurve, QuadratureSpec, TimeGrid, boundary_residual, solve_boundary
from .core import ModelParams
from .errors import BracketError, DomainError, MissingCurve, RegimeError, ResourceError
from .montecarlo import (
    INEQUALITY_IDS,
    BoundaryRatio,
    FixedTime,
    Immediate,
    RatioThreshold,
    SimConfig,
    Terminal,
    check_inequality,
    run_rules,
)
from .value import (
    InfimumRegime,
    classify_infimum,
    classify_supremum,
    validate_fb_conditions,
    value_infimum,
    value_V1,
    value_V2,
)

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_USAGE, EXIT_REGIME, EXIT_FAIL, EXIT_RESOURCE = 0, 2, 3, 4, 5

DEFAULTS = {
    "mu": 0.5,
    "sigma": 1.0,
    "horizon": 1.0,
    "steps": 200,
    "quad_panels": 64,
    "trunc_c": 8.0,
    "paths": 100_000,
    "mc_steps": 1000,
    "seed": 0,
    "tol": 1e-3,
    "format": None,
    "out": None,
    "workers": 1,
}
_TYPES = {
    "mu": float,
    "sigma": float,
    "horizon": float,
    "steps": int,
    "quad_panels": int,
    "trunc_c": float,
    "paths": lambda s: int(float(s)),
    "mc_steps": int,
    "seed": int,
    "tol": float,
    "format": str,
    "out": str,
    "workers": int,
}

# drift used by each Monte Carlo check when --mu is not given
VERIFY_MU = {"4.2": 1.0, "4.3": 0.2, "4.45": 1.5, "4.46": -0.5}
VERIFY_LAMBDAS = {
    "4.56": [-0.5, -0.25, 0.0, 0.5, 1.0],
    "4.57": [0.5, 1.0, 2.0],
    "4.58": [-2.0, -1.0, -0.5],
    "4.59": [-1.0, 0.0, 0.5],
}

log = logging.getLogger("ultimax")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: ModelParams
    steps: int
    quad: QuadratureSpec
    sim: SimConfig
    tol: float
    format: str
    out: str | None
    workers: int
    explicit: set = field(default_factory=set)
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "steps": self.steps,
            "quad_panels": self.quad.s_panels,
            "trunc_c": self.quad.trunc_c,
            "paths": self.sim.n_paths,
            "mc_steps": self.sim.n_steps,
            "seed": self.sim.seed,
            "tol": self.tol,
            "workers": self.workers,
            **{k: v for k, v in self.extra.items() if v is not None},
        }


# ---------------------------------------------------------------- parsing --


def _shared(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and numerics")
    g.add_argument("--mu", type=float, help="drift (default 0.5)")
    g.add_argument("--sigma", type=float, help="volatility, > 0 (default 1)")
    g.add_argument("--horizon", type=float, help="horizon T (default 1)")
    g.add_argument("--steps", type=int, help="time steps of the boundary grid (default 200)")
    g.add_argument("--quad-panels", type=int, help="Simpson panels per quadrature (default 64)")
    g.add_argument("--trunc-c", type=float, help="tail truncation in standard deviations (default 8)")
    g.add_argument("--paths", type=lambda s: int(float(s)), help="Monte Carlo paths (default 1e5)")
    g.add_argument("--mc-steps", type=int, help="Monte Carlo time steps (default 1000)")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--tol", type=float, help="max relative Volterra residual for success (default 1e-3)")
    g.add_argument("--workers", type=int, help="Monte Carlo worker threads (default 1)")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--out", help="output path (default stdout)")
    g.add_argument("--config", help="flat key = value file of defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ultimax", description="Optimal selling of a stock against its ultimate maximum."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("regime", help="classify the infimum and supremum problems")
    _shared(p)

    p = sub.add_parser("boundary", help="solve for the optimal selling boundary")
    _shared(p)
    p.add_argument("--svg", help="also write an SVG plot of b and h")

    p = sub.add_parser("value", help="V1, V2 and the selling rule")
    _shared(p)
    p.add_argument("--t", type=float, default=0.0, help="time of the value function (default 0)")
    p.add_argument("--x", type=float, default=0.0, help="state of the value function (default 0)")
    p.add_argument("--boundary-file", help="boundary CSV or JSON written by 'boundary'")
    p.add_argument("--no-solve", action="store_true", help="never solve for the boundary inline")

    p = sub.add_parser("simulate", help="Monte Carlo estimates of selling rules")
    _shared(p)
    p.add_argument(
        "--rules",
        default="immediate,terminal",
        help="comma list of immediate, terminal, fixed:T, ratio:C, boundary",
    )
    p.add_argument("--objective", choices=("ratio-inf", "ratio-sup", "both"), default="ratio-inf")
    p.add_argument("--boundary-file")
    p.add_argument("--no-solve", action="store_true")

    p = sub.add_parser("verify", help="check the key inequalities and free-boundary conditions")
    _shared(p)
    p.add_argument("--only", help="comma list of " + ", ".join(INEQUALITY_IDS) + ", fb")
    p.add_argument("--lambdas", help="comma list of drifts for the quadrature inequalities")
    p.add_argument("--boundary-file")
    return parser


def read_config_file(path: str) -> dict:
    """Parse a flat ``key = value`` file; keys may use dashes or underscores."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string("[run]\n" + Path(path).read_text())
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for key, raw in cp["run"].items():
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise UsageError(f"unknown config key {key!r}")
        try:
            out[key] = _TYPES[key](raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {raw!r}") from exc
    return out


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge command line, config file and defaults, then validate."""
    from_file = read_config_file(args.config) if args.config else {}
    settings = {**DEFAULTS, **from_file}
    explicit = set(from_file)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
            explicit.add(key)
    try:
        params = ModelParams(settings["mu"], settings["sigma"], settings["horizon"])
        quad = QuadratureSpec(settings["quad_panels"], settings["quad_panels"], settings["trunc_c"])
        sim = SimConfig(n_paths=settings["paths"], n_steps=settings["mc_steps"], seed=settings["seed"])
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    if settings["steps"] < 2:
        raise UsageError("--steps must be >= 2")
    if settings["workers"] < 1:
        raise UsageError("--workers must be >= 1")
    fmt = settings["format"] or ("csv" if args.command == "boundary" else "json")
    if fmt not in ("csv", "json"):
        raise UsageError("--format must be csv or json")
    extra = {
        k: getattr(args, k)
        for k in ("t", "x", "boundary_file", "no_solve", "rules", "objective", "only", "lambdas", "svg")
        if hasattr(args, k)
    }
    return RunConfig(
        command=args.command,
        params=params,
        steps=settings["steps"],
        quad=quad,
        sim=sim,
        tol=settings["tol"],
        format=fmt,
        out=settings["out"],
        workers=settings["workers"],
        explicit=explicit,
        extra=extra,
    )


# ----------------------------------------------------------- serializers --


def _num(x) -> str:
    return f"{float(x):.12g}"


def _round(obj):
    """Floats to 12 significant digits, recursively; numpy scalars to Python."""
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if not math.isfinite(v) else float(_num(v))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    return obj


def json_document(cfg: RunConfig, results) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "params": cfg.params.as_dict(),
        "config": cfg.as_dict(),
        "results": results,
    }
    return json.dumps(_round(doc), indent=2, sort_keys=False) + "\n"


def curve_to_csv(curve: BoundaryCurve) -> str:
    buf = io.StringIO()
    buf.write("t,b,h,residual\n")
    for t, b, h, r in zip(curve.times, curve.b_values, curve.h_values, curve.residuals):
        buf.write(f"{_num(t)},{_num(b)},{_num(h)},{_num(r)}\n")
    return buf.getvalue()


def curve_to_dict(curve: BoundaryCurve) -> dict:
    return {
        "params": curve.params.as_dict(),
        "grid": curve.times,
        "b": curve.b_values,
        "h": curve.h_values,
        "residuals": curve.residuals,
        "solver_config": curve.config(),
    }


def load_curve(path: str, params: ModelParams, quad: QuadratureSpec) -> BoundaryCurve:
    """Read a boundary written as CSV or JSON by the ``boundary`` subcommand."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        body = doc.get("results", doc)
        stored = body.get("params")
        if stored and any(abs(stored[k] - getattr(params, k)) > 1e-12 for k in ("mu", "sigma", "horizon")):
            raise UsageError(f"boundary file was solved for {stored}, not {params.as_dict()}")
        t, b, h, r = (np.asarray(body[k], dtype=float) for k in ("grid", "b", "h", "residuals"))
    else:
        lines = text.strip().splitlines()
        if lines[0].strip() != "t,b,h,residual":
            raise UsageError(f"{path}: expected header 't,b,h,residual'")
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        t, b, h, r = data.T
    try:
        grid = TimeGrid(t)
    except DomainError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    if abs(grid.horizon - params.horizon) > 1e-9:
        raise UsageError(f"{path}: grid ends at {grid.horizon}, horizon is {params.horizon}")
    return BoundaryCurve(params, grid, b, h, r, quad)


def boundary_svg(curve: BoundaryCurve, width: int = 640, height: int = 400) -> str:
    """Minimal SVG with the boundary b and the zero curve h of the drift."""
    pad = 50
    T = curve.grid.horizon
    top = max(float(curve.b_values.max()), float(curve.h_values.max()), 1e-9) * 1.1

    def pts(vals):
        xs = pad + (width - 2 * pad) * curve.times / T
        ys = height - pad - (height - 2 * pad) * np.asarray(vals) / top
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))

    p = curve.params
    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
            f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
            f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle" font-size="12">t (0 to {_num(T)})</text>',
            f'<text x="12" y="{pad - 10}" font-size="12">x (0 to {_num(top)})</text>',
            f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{pts(curve.b_values)}"/>',
            f'<polyline fill="none" stroke="darkorange" stroke-width="2" stroke-dasharray="6,4" points="{pts(curve.h_values)}"/>',
            f'<text x="{width - pad - 150}" y="{pad}" font-size="12" fill="steelblue">b (selling boundary)</text>',
            f'<text x="{width - pad - 150}" y="{pad + 16}" font-size="12" fill="darkorange">h (zero of H)</text>',
            f'<text x="{pad + 10}" y="{pad - 10}" font-size="12">mu={_num(p.mu)} sigma={_num(p.sigma)}</text>',
            "</svg>",
            "",
        ]
    )


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------- subcommands --


def _closed_form_message(regime: str) -> str:
    return {"StopImmediately": "StopImmediately: V = G", "WaitUntilEnd": "WaitUntilEnd: V = J"}.get(regime, regime)


def _curve_for(cfg: RunConfig, allow_solve: bool = True) -> BoundaryCurve:
    path = cfg.extra.get("boundary_file")
    if path:
        return load_curve(path, cfg.params, cfg.quad)
    if not allow_solve or cfg.extra.get("no_solve"):
        raise MissingCurve("boundary regime needs --boundary-file (or drop --no-solve)")
    return solve_boundary(cfg.params, TimeGrid.uniform(cfg.params.horizon, cfg.steps), cfg.quad)


def cmd_regime(cfg: RunConfig) -> int:
    p = cfg.params
    inf, sup = classify_infimum(p), classify_supremum(p)
    thresholds = {"zero": 0.0, "half_sigma_sq": 0.5 * p.sigma**2, "sigma_sq": p.sigma**2}
    if cfg.format == "json":
        _emit(cfg, json_document(cfg, {"infimum": inf.value, "supremum": sup.value, "thresholds": thresholds, "lambda": p.lam}))
    else:
        lines = [
            "key,value",
            f"infimum,{inf.value}",
            f"supremum,{sup.value}",
            f"lambda,{_num(p.lam)}",
            *(f"threshold_{k},{_num(v)}" for k, v in thresholds.items()),
        ]
        _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_boundary(cfg: RunConfig) -> int:
    curve = solve_boundary(cfg.params, TimeGrid.uniform(cfg.params.horizon, cfg.steps), cfg.quad)
    stats = boundary_residual(curve)
    if cfg.format == "csv":
        _emit(cfg, curve_to_csv(curve))
    else:
        _emit(cfg, json_document(cfg, {**curve_to_dict(curve), "refined_residual": {"max": stats.max, "mean": stats.mean}}))
    if cfg.extra.get("svg"):
        Path(cfg.extra["svg"]).write_text(boundary_svg(curve))
    if curve.clamped:
        log.warning("monotonicity clamp applied at %d node(s)", len(curve.clamped))
    if stats.max > cfg.tol:
        log.error("refined residual %.3g exceeds --tol %.3g", stats.max, cfg.tol)
        return EXIT_FAIL
    return EXIT_OK


def cmd_value(cfg: RunConfig) -> int:
    p = cfg.params
    t, x = cfg.extra.get("t", 0.0), cfg.extra.get("x", 0.0)
    regime = classify_infimum(p)
    curve = _curve_for(cfg) if regime is InfimumRegime.BOUNDARY else None
    v1 = value_V1(p, curve, cfg.quad)
    v2 = value_V2(p)
    results = {
        "infimum": {"regime": regime.value, "V1": v1.value, "rule": v1.rule()},
        "supremum": {"regime": v2.regime.value, "V2": v2.value, "candidates": v2.candidates},
    }
    if (t, x) != (0.0, 0.0):
        results["infimum"]["V"] = {"t": t, "x": x, "value": value_infimum(t, x, p, curve, cfg.quad)}
    if v1.threshold is not None:
        results["infimum"]["threshold_ratio"] = {"t": v1.times, "exp_sigma_b": v1.threshold}
    if cfg.format == "csv":
        rows = ["quantity,value", f"V1,{_num(v1.value)}", f"V2,{_num(v2.value)}"]
        if "V" in results["infimum"]:
            rows.append(f"V(t;x),{_num(results['infimum']['V']['value'])}")
        _emit(cfg, "\n".join(rows) + "\n")
    else:
        _emit(cfg, json_document(cfg, results))
    return EXIT_OK


def parse_rules(spec: str, cfg: RunConfig) -> list:
    rules = []
    for item in filter(None, (s.strip() for s in spec.split(","))):
        name, _, arg = item.partition(":")
        try:
            if name == "immediate":
                rules.append(Immediate())
            elif name == "terminal":
                rules.append(Terminal())
            elif name == "fixed":
                rules.append(FixedTime(float(arg) if arg else 0.5 * cfg.params.horizon))
            elif name == "ratio":
                rules.append(RatioThreshold(float(arg) if arg else 1.2))
            elif name == "boundary":
                regime = classify_infimum(cfg.params)
                if regime is not InfimumRegime.BOUNDARY:
                    raise RegimeError("the boundary rule needs 0 < mu < sigma^2", regime=regime.value)
                rules.append(BoundaryRatio(_curve_for(cfg)))
            else:
                raise UsageError(f"unknown rule {item!r}")
        except ValueError as exc:
            raise UsageError(f"bad rule argument in {item!r}") from exc
    if not rules:
        raise UsageError("no rules given")
    return rules


def cmd_simulate(cfg: RunConfig) -> int:
    rules = parse_rules(cfg.extra.get("rules") or "immediate,terminal", cfg)
    obj = cfg.extra.get("objective") or "ratio-inf"
    objectives = ("ratio-inf", "ratio-sup") if obj == "both" else (obj,)
    cmp = run_rules(cfg.params, cfg.sim, rules, objectives, cfg.workers)
    results = cmp.as_dict()
    if cfg.format == "csv":
        rows = ["objective,rule,mean,std_error,n_paths,seed"]
        for o in objectives:
            for n in cmp.names:
                e = cmp.estimate(n, o)
                rows.append(f"{o},{n},{_num(e.mean)},{_num(e.std_error)},{e.n_paths},{e.seed}")
        _emit(cfg, "\n".join(rows) + "\n")
    else:
        _emit(cfg, json_document(cfg, results))
    return EXIT_OK


def _parse_list(text: str | None) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()] if text else []


def cmd_verify(cfg: RunConfig) -> int:
    only = _parse_list(cfg.extra.get("only")) or [*INEQUALITY_IDS, "fb"]
    for item in only:
        if item not in INEQUALITY_IDS and item != "fb":
            raise UsageError(f"unknown check {item!r}")
    lambdas = [float(v) for v in _parse_list(cfg.extra.get("lambdas"))] or None
    reports = []
    for ineq in only:
        if ineq == "fb":
            continue
        if ineq in VERIFY_LAMBDAS:
            rep = check_inequality(ineq, lambdas or VERIFY_LAMBDAS[ineq])
        else:
            mu = cfg.params.mu if "mu" in cfg.explicit else VERIFY_MU[ineq]
            params = ModelParams(mu, cfg.params.sigma, cfg.params.horizon)
            rep = check_inequality(ineq, params=params, config=cfg.sim, workers=cfg.workers)
        reports.append(rep)
    results = {"inequalities": [r.as_dict() for r in reports]}
    ok = all(r.passed for r in reports)
    if "fb" in only:
        mu = cfg.params.mu if "mu" in cfg.explicit else 0.5
        params = ModelParams(mu, cfg.params.sigma, cfg.params.horizon)
        if classify_infimum(params) is not InfimumRegime.BOUNDARY:
            raise RegimeError("free-boundary checks need 0 < mu < sigma^2", regime=classify_infimum(params).value)
        cfg_fb = RunConfig(**{**cfg.__dict__, "params": params})
        curve = _curve_for(cfg_fb)
        fb = validate_fb_conditions(params, curve, cfg.quad)
        results["free_boundary"] = fb.as_dict()
        ok = ok and fb.passed
    results["passed"] = ok
    if cfg.format == "csv":
        rows = ["check,passed,worst_margin"]
        rows += [f"{r.id},{r.passed},{_num(r.worst_margin)}" for r in reports]
        if "free_boundary" in results:
            rows.append(f"fb,{results['free_boundary']['passed']},")
        _emit(cfg, "\n".join(rows) + "\n")
    else:
        _emit(cfg, json_document(cfg, results))
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "regime": cmd_regime,
    "boundary": cmd_boundary,
    "value": cmd_value,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[cfg.command](cfg)
    except (UsageError, DomainError, MissingCurve) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RegimeError as exc:
        print(_closed_form_message(exc.regime) if exc.regime else str(exc), file=sys.stderr)
        return EXIT_REGIME
    except BracketError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
