"""Dividend ratcheting with capital injections: solver and verification toolkit."""

from .errors import (
    CacheError,
    DivRatchetError,
    DomainTooSmall,
    NoConvergence,
    ObstacleViolation,
    ParseError,
    RateOutOfRange,
    ValidationError,
)
from .model import (
    ClaimDistribution,
    Exponential,
    HyperExponential,
    ModelParams,
    ShiftedPareto,
    cdf,
    density,
    h_eval,
    make_distribution,
)
from .discretization import (
    Grid,
    GridFn,
    apply_I,
    apply_T,
    residual_Lc,
)
from .boundary import BoundarySolution, boundary_residual_report, solve_g
from .ladder import (
    LadderDiagnostics,
    RateLadder,
    ValueSlice,
    slope_growth_bound,
    solve_ladder,
    solve_rung,
)
from .surface import (
    FreeBoundaryCurve,
    RateMap,
    ValueSurface,
    build_rate_map,
    equivalent_max_rate,
    extract_boundary,
)
from .simulate import (
    PathRecord,
    PayoffEstimate,
    default_horizon,
    estimate_boundary_payoff,
    estimate_constant_payoff,
    estimate_ratchet_payoff,
    simulate_boundary,
    simulate_constant,
    simulate_ratchet,
)
from .verify import (
    Certificate,
    CheckResult,
    calibrate_eps_disc,
    mc_cross_check,
    run_invariant_suite,
)
from .config import RunConfig, claims_spec, config_from_mapping, load_config
from .cache import read_surface, write_surface

__version__ = "0.1.0"

__all__ = [
    "BoundarySolution",
    "CacheError",
    "Certificate",
    "CheckResult",
    "ClaimDistribution",
    "DivRatchetError",
    "DomainTooSmall",
    "Exponential",
    "FreeBoundaryCurve",
    "Grid",
    "GridFn",
    "HyperExponential",
    "LadderDiagnostics",
    "ModelParams",
    "NoConvergence",
    "ObstacleViolation",
    "ParseError",
    "PathRecord",
    "PayoffEstimate",
    "RateLadder",
    "RateMap",
    "RateOutOfRange",
    "RunConfig",
    "ShiftedPareto",
    "ValidationError",
    "ValueSlice",
    "ValueSurface",
    "apply_I",
    "apply_T",
    "boundary_residual_report",
    "build_rate_map",
    "calibrate_eps_disc",
    "cdf",
    "claims_spec",
    "config_from_mapping",
    "default_horizon",
    "density",
    "equivalent_max_rate",
    "estimate_boundary_payoff",
    "estimate_constant_payoff",
    "estimate_ratchet_payoff",
    "extract_boundary",
    "h_eval",
    "load_config",
    "make_distribution",
    "mc_cross_check",
    "read_surface",
    "residual_Lc",
    "run_invariant_suite",
    "simulate_boundary",
    "simulate_constant",
    "simulate_ratchet",
    "slope_growth_bound",
    "solve_g",
    "solve_ladder",
    "solve_rung",
    "write_surface",
    "__version__",
]
