"""Cross-validation of a solved surface: structural invariants plus a
Monte Carlo comparison through an independent route.

Every invariant the solver is supposed to enforce is re-measured here from
the stored arrays (never from solver-internal state) and reported as a
named check with its bound, the observed value, and the margin.  Failures
are data, not exceptions, so a corrupted surface produces a failing
certificate instead of a crash.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import simulate as sim
from .discretization import Grid, GridFn, residual_Lc
from .errors import ValidationError
from .ladder import RateLadder, slope_growth_bound, solve_ladder
from .model import ClaimDistribution, ModelParams
from .surface import RateMap, ValueSurface, build_rate_map, extract_boundary

#: default tolerances; a caller-supplied dict overrides individual keys
DEFAULT_TOLERANCES = {
    "residual": 1e-8,
    "envelope": 1e-8,
    "gradient": 1e-8,
    "concavity": 1e-8,
    "dirichlet": 1e-12,
    "curvature": 1e-6,
    "u_bound": 1e-6,
    "u_growth": 1e-6,
    "complementarity": 1e-8,
    "boundary_fraction": 0.8,
}


@dataclass
class CheckResult:
    """One named invariant check.  passed iff observed <= bound; margin is
    bound - observed (positive = slack)."""

    name: str
    description: str
    bound: float
    observed: float

    @property
    def margin(self) -> float:
        return self.bound - self.observed

    @property
    def passed(self) -> bool:
        return bool(self.observed <= self.bound)


@dataclass
class Certificate:
    """Deterministic pass/fail report over a list of checks."""

    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "description": c.description,
                    "bound": c.bound,
                    "observed": c.observed,
                    "margin": c.margin,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @staticmethod
    def merged(*certs: "Certificate") -> "Certificate":
        out = []
        for c in certs:
            out.extend(c.checks)
        return Certificate(checks=out)


def run_invariant_suite(
    surface: ValueSurface,
    d: ClaimDistribution,
    boundary=None,
    diagnostics=None,
    tolerances: dict | None = None,
) -> Certificate:
    """Re-measure every structural invariant of a solved surface.

    boundary and diagnostics are accepted for callers that carry solver
    artifacts; the checks themselves read only the surface arrays and the
    claim distribution, so corrupted data cannot hide behind stale solver
    state.
    """
    tol = dict(DEFAULT_TOLERANCES)
    if tolerances:
        tol.update(tolerances)
    m = surface.m
    grid = surface.grid
    ladder = surface.ladder
    dx = grid.dx
    dc = ladder.dc
    v = surface.v
    vp = surface.v_prime
    masks = surface.masks
    rates = surface.rates
    mean_claim = float(d.tail_mean(0.0))
    checks = []

    def add(name, description, bound, observed):
        checks.append(
            CheckResult(
                name=name,
                description=description,
                bound=float(bound),
                observed=float(observed),
            )
        )

    # cap-rate equation residual on interior nodes
    g_fn = GridFn(grid=grid, values=v[0])
    gp_fn = GridFn(grid=grid, values=vp[0])
    res = residual_Lc(m, d, m.c_bar, g_fn, gp_fn).values
    add(
        "boundary_residual",
        "cap-rate integro-differential equation residual, sup over interior",
        tol["residual"],
        np.max(np.abs(res[: grid.n_x])),
    )
    add(
        "boundary_dirichlet",
        "far-field pin |v(L) - c_bar/r| at the cap rung",
        tol["dirichlet"],
        abs(v[0, -1] - m.c_bar / m.r),
    )

    # value envelope per rung: (c_i - lam*ell*E[Z])/r <= v_i <= c_bar/r
    lower_env = (rates - m.lam * m.ell * mean_claim) / m.r
    add(
        "value_lower_envelope",
        "each rung stays above its perpetuity minus expected injection load",
        tol["envelope"],
        np.max(lower_env[:, None] - v),
    )
    add(
        "value_upper_envelope",
        "no rung exceeds the cap-rate perpetuity c_bar/r",
        tol["envelope"],
        np.max(v - m.c_bar / m.r),
    )

    # gradient window 0 <= v_x <= ell
    add(
        "gradient_nonnegative",
        "value non-decreasing in surplus",
        tol["gradient"],
        np.max(-vp),
    )
    add(
        "gradient_injection_cap",
        "marginal value of surplus never exceeds the injection cost ell",
        tol["gradient"],
        np.max(vp - m.ell),
    )

    # curvature: lower bound everywhere, concavity up to the truncation
    # layer near the Dirichlet pin (positive part decays like dx^2)
    sd = np.diff(v, 2, axis=1) / dx**2
    add(
        "curvature_lower",
        "discrete second derivative bounded below by -lam*ell/(mu - c_bar)",
        tol["curvature"],
        np.max(-sd - m.lam * m.ell / (m.mu - m.c_bar)),
    )
    add(
        "concavity",
        "discrete second derivative nonpositive up to an O(dx^2) pin layer",
        tol["concavity"] + 0.5 * dx**2,
        np.max(sd) * dx**2,
    )

    # obstacle ordering and slope-increment window
    gaps = v[1:] - v[:-1]
    add(
        "obstacle_order",
        "each rung dominates the next-higher rate's value (projection exact)",
        0.0,
        np.max(-gaps) if gaps.size else -np.inf,
    )
    u = gaps / dc  # relaxing the floor rate adds value: u >= 0
    add(
        "rate_slope_nonnegative",
        "value non-decreasing as the rate floor relaxes downward",
        0.0,
        np.max(-u) if u.size else -np.inf,
    )
    add(
        "rate_slope_upper",
        "rate-direction slope at most (ell - 1)/r",
        tol["u_bound"],
        np.max(u - (m.ell - 1.0) / m.r) if u.size else -np.inf,
    )
    if u.shape[0] >= 2:
        growth = u[:-1] - u[1:] - slope_growth_bound(m) * dc
        add(
            "rate_slope_growth",
            "rate-direction slope increments bounded by the drift constant",
            tol["u_growth"],
            np.max(growth),
        )
    else:
        add(
            "rate_slope_growth",
            "rate-direction slope increments bounded by the drift constant",
            tol["u_growth"],
            -np.inf,
        )

    # complementarity: on every node either the equation holds or the
    # obstacle binds
    comp = 0.0
    for i in range(1, ladder.n + 1):
        vi = GridFn(grid=grid, values=v[i])
        vpi = GridFn(grid=grid, values=vp[i])
        res_i = residual_Lc(m, d, rates[i], vi, vpi).values
        gap_i = v[i] - v[i - 1]
        comp = max(
            comp, float(np.max(np.minimum(np.abs(res_i[: grid.n_x]), gap_i[: grid.n_x])))
        )
    add(
        "complementarity",
        "min(equation residual, obstacle gap) vanishes on interior nodes",
        tol["complementarity"],
        comp,
    )

    # switch masks: once switching is optimal it stays optimal for larger x
    viol = 0
    for i in range(1, ladder.n + 1):
        row = masks[i]
        first = np.argmax(row) if row.any() else row.size
        viol += int(np.sum(~row[first:]))
    add(
        "mask_up_closed",
        "contact region of each rung is an upper interval in surplus",
        0.0,
        viol,
    )

    # switching thresholds: inside the trusted domain, and zero for every
    # lower rate once the gradient at zero drops to 1
    fb = extract_boundary(surface)
    add(
        "boundary_inside_domain",
        "largest switching threshold within the trusted fraction of L",
        tol["boundary_fraction"],
        np.max(fb.x_star) / grid.L,
    )
    vp0 = vp[:, 0]
    small = np.flatnonzero(vp0 <= 1.0 + 1e-9)
    if small.size:
        i0 = max(int(small.min()), 1)
        prop = float(np.max(fb.x_star[i0:]))
    else:
        prop = 0.0
    add(
        "threshold_collapse",
        "gradient at zero at most 1 forces zero thresholds at all lower rates",
        0.0,
        prop,
    )

    # equivalent-rate table consistency
    rm = build_rate_map(surface)
    dd = np.diff(rm.values, axis=1)
    add(
        "rate_map_monotone",
        "equivalent maximum rate non-decreasing in surplus",
        0.0,
        np.max(-dd) if dd.size else -np.inf,
    )
    range_slack = max(
        float(np.max(rates[:, None] - rm.values)),
        float(np.max(rm.values - m.c_bar)),
    )
    add(
        "rate_map_range",
        "equivalent maximum rate between the rung's own rate and the cap",
        0.0,
        range_slack,
    )

    return Certificate(checks=checks)


def calibrate_eps_disc(
    m: ModelParams,
    d: ClaimDistribution,
    grid: Grid,
    ladder: RateLadder,
    update_tol: float = 1e-10,
    method: str = "auto",
) -> tuple[float, float]:
    """Measure the discretization budget eps = kappa*(dx + dc) from one
    refinement pair (n_x, n) -> (2 n_x, 2 n).

    kappa is set to three times the observed sup value change per unit of
    (dx + dc), so the budget covers the remaining bias of the coarse grid
    with the standard geometric-series headroom of a first-order scheme.
    """
    slices_c, _ = solve_ladder(m, d, grid, ladder, update_tol=update_tol, method=method)
    fine_grid = Grid(L=grid.L, n_x=2 * grid.n_x)
    fine_ladder = RateLadder(
        c_bar=ladder.c_bar, c_floor=ladder.c_floor, n=2 * ladder.n
    )
    slices_f, _ = solve_ladder(
        m, d, fine_grid, fine_ladder, update_tol=update_tol, method=method
    )
    vc = np.stack([s.v.values for s in slices_c])
    vf = np.stack([s.v.values for s in slices_f])
    diff = np.max(np.abs(vc - vf[::2, ::2]))
    step = grid.dx + ladder.dc
    kappa = 3.0 * diff / step
    return kappa, kappa * step


def mc_cross_check(
    surface: ValueSurface,
    d: ClaimDistribution,
    points: list,
    n_paths: int,
    seed: int,
    eps_disc: float,
    horizon: float | None = None,
    rate_map: RateMap | None = None,
    constant_rates: list | None = None,
) -> Certificate:
    """Monte Carlo agreement and dominance checks at the given (x0, c0)
    points.

    Agreement: |MC mean of the feedback strategy - value_at| <= 3 SE +
    eps_disc + tail bound.  Dominance: every constant-rate strategy with
    rate in [c0, c_bar] stays below value_at plus the same budget.
    """
    if n_paths < 2:
        raise ValidationError("need at least 2 paths")
    m = surface.m
    rm = rate_map if rate_map is not None else build_rate_map(surface)
    checks = []
    for k, (x0, c0) in enumerate(points):
        est = sim.estimate_ratchet_payoff(
            m, d, rm, x0, c0, n_paths, seed + 7 * k, horizon=horizon
        )
        v = surface.value_at(x0, c0)
        budget = 3.0 * est.std_error + eps_disc + est.tail_bound
        checks.append(
            CheckResult(
                name=f"mc_agreement_{k}",
                description=(
                    f"feedback-strategy sample mean matches the surface at "
                    f"(x0={x0}, c0={c0}) within 3 SE + discretization budget"
                ),
                bound=budget,
                observed=abs(est.mean - v),
            )
        )
        for c_const in constant_rates or [0.5 * (c0 + m.c_bar)]:
            if not c0 <= c_const <= m.c_bar:
                continue
            est_c = sim.estimate_constant_payoff(
                m, d, c_const, x0, n_paths, seed + 7 * k + 3, horizon=horizon
            )
            checks.append(
                CheckResult(
                    name=f"mc_dominance_{k}_{c_const}",
                    description=(
                        f"constant rate {c_const} from (x0={x0}, c0={c0}) "
                        f"does not beat the surface value"
                    ),
                    bound=3.0 * est_c.std_error + eps_disc + est_c.tail_bound,
                    observed=est_c.mean - v,
                )
            )
    return Certificate(checks=checks)
