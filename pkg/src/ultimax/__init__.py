"""Optimal selling of a stock against its ultimate maximum.

Closed-form gain and drift functions, the Volterra-equation boundary, the
value function, Monte Carlo of selling rules and quadrature checks of the
inequalities behind the bang-bang results.
"""

from .boundary import (
    BoundaryCurve,
    QuadratureSpec,
    ResidualStats,
    TimeGrid,
    boundary_residual,
    eval_J,
    eval_K,
    rbm_density,
    solve_boundary,
)
from .core import (
    ExponentSign,
    ModelParams,
    StateTimePoint,
    drift_H,
    drift_H_dt,
    gain,
    gain_dx,
    gain_integral,
    gain_tau,
    h_curve,
    joint_density,
    max_cdf,
    max_sf,
    std_normal_cdf,
    std_normal_pdf,
)
from .errors import BracketError, DomainError, MissingCurve, RegimeError, ResourceError, UltimaxError
from .montecarlo import (
    BoundaryRatio,
    FixedTime,
    Immediate,
    InequalityReport,
    McEstimate,
    RatioThreshold,
    RuleComparison,
    SimConfig,
    Terminal,
    check_inequality,
    default_rules,
    estimate_objective,
    run_rules,
    simulate_ensemble,
)
from .value import (
    FBReport,
    InfimumRegime,
    SupremumRegime,
    classify_infimum,
    classify_supremum,
    validate_fb_conditions,
    value_infimum,
    value_V1,
    value_V2,
)

__version__ = "0.1.0"
