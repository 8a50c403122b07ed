"""Regime-switching rate ladder: the obstacle chain over decreasing rates.

Rung i carries the value v_i of the problem whose current dividend rate is
c_i = c_bar - i*(c_bar - c_floor)/n, with the option to ratchet the rate
upward.  Each rung solves the variational inequality

    min( -(mu - c_i) v' + (r + lam) v - T v + h - c_i ,  v - v_{i-1} ) = 0

with the previous rung as obstacle and v_0 = g (the cap-rate boundary
solution).  Discretely this is a complementarity system for the same
upwind/product-integration scheme as the g solve; each Picard stage is
solved exactly by the projected backward sweep, which is valid because the
contact set is an upper interval in x (switching is optimal below the free
boundary, waiting above it).

A converged rung satisfies, up to iteration error:
    v_i >= v_{i-1}                          (bitwise, by the projection),
    residual >= 0 and residual * (v_i - v_{i-1}) = 0 at every node,
    0 <= (v_i - v_{i-1})/dc <= (ell - 1)/r.
These are re-checked here and gated precisely by the verification layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._sweep import projected_backward_scan
from .boundary import BoundarySolution, solve_g
from .discretization import Grid, GridFn, get_kernel
from .errors import DomainTooSmall, NoConvergence, ObstacleViolation, ValidationError
from .model import ClaimDistribution, ModelParams, h_eval

#: switch-region detector: nodes with v_i - v_{i-1} <= EPS_EQ * max(dc, dx)
#: count as "equal value".  Contact nodes are bitwise equal after the
#: projected sweep, so the threshold only guards sub-tolerance drift.
EPS_EQ = 1e-6


@dataclass(frozen=True)
class RateLadder:
    """Uniform rate discretization c_i = c_bar - i*dc, i = 0..n."""

    n: int
    c_bar: float
    c_floor: float

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValidationError("ladder.n must be an integer >= 1")
        if not self.c_floor < self.c_bar:
            raise ValidationError("ladder needs c_floor < c_bar")

    @property
    def dc(self) -> float:
        return (self.c_bar - self.c_floor) / self.n

    @property
    def rates(self) -> np.ndarray:
        # linspace pins both endpoints exactly; c_bar - i*dc can miss the
        # floor by an ulp when the span is not dyadic
        return np.linspace(self.c_bar, self.c_floor, self.n + 1)


@dataclass
class ValueSlice:
    """One rung: value, derivative, and the switch mask (v_i = v_{i-1})."""

    rate: float
    v: GridFn
    v_prime: GridFn
    switch_mask: np.ndarray
    iterations: int = 0
    final_update_norm: float = 0.0


@dataclass
class LadderDiagnostics:
    """Per-rung solve statistics and the discrete comparison constants."""

    rates: np.ndarray
    iterations: np.ndarray
    update_norms: np.ndarray
    u_sup: np.ndarray
    u_min: np.ndarray
    second_diff_min: np.ndarray
    dc: float
    slope_growth_bound: float  # B in u_{i-1} <= u_i + B*dc
    total_iterations: int = field(init=False)

    def __post_init__(self):
        self.total_iterations = int(np.sum(self.iterations))


def slope_growth_bound(m: ModelParams) -> float:
    """B = 2 (r + lam)(ell - 1) / (r^2 (mu - c_bar)): rung-to-rung growth
    allowance for the switch gain u_i in the discrete comparison argument."""
    return 2.0 * (m.r + m.lam) * (m.ell - 1.0) / (m.r**2 * (m.mu - m.c_bar))


def solve_rung(
    prev: ValueSlice,
    c: float,
    m: ModelParams,
    d: ClaimDistribution,
    grid: Grid,
    update_tol: float = 1e-10,
    max_iter: int = 10000,
    method: str = "auto",
    mask_threshold: float | None = None,
    rung_label: str = "",
) -> ValueSlice:
    """Solve one obstacle problem with the previous rung as obstacle.

    Warm-starts from the obstacle itself (a subsolution), iterates the
    frozen-T projected sweep, and classifies the contact set.  Raises
    NoConvergence if the sweep stalls and ObstacleViolation if the
    converged rung breaks ordering or complementarity (a scheme bug, not a
    data error).
    """
    n = grid.n_x
    dx = grid.dx
    kern = get_kernel(d, grid)
    h = h_eval(m, d, grid.nodes)
    a = (m.mu - c) / dx
    b = a + m.r + m.lam
    qt = a / b
    v_L = prev.v.values[n]
    psi = prev.v.values[:n]

    v = prev.v.values.copy()
    update = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        t = m.lam * (kern.convolve(v, method) + v[0] * kern.tail)
        phi = t - h + c
        v_new = projected_backward_scan(phi[:n] / b, qt, psi, v_L)
        update = float(np.max(np.abs(v_new - v)))
        v = v_new
        if update <= update_tol:
            break
    else:
        raise NoConvergence(
            f"rung {rung_label or c}: sup-norm update {update:.3e} above "
            f"{update_tol:.1e} after {max_iter} sweeps",
            iterations=max_iter,
            update_norm=update,
        )

    gap = v - prev.v.values
    if gap.min() < 0.0:
        raise ObstacleViolation(
            f"rung {rung_label or c}: value dips {-gap.min():.3e} below the obstacle"
        )
    if mask_threshold is None:
        mask_threshold = EPS_EQ * dx
    mask = gap <= mask_threshold

    t = m.lam * (kern.convolve(v, method) + v[0] * kern.tail)
    residual = -(m.mu - c) * np.diff(v) / dx + (m.r + m.lam) * v[:n] - t[:n] + h[:n] - c
    tol_c = max(1e-9, 1e2 * update_tol) * max(1.0, float(np.max(np.abs(v))))
    if residual.min() < -tol_c:
        raise ObstacleViolation(
            f"rung {rung_label or c}: scheme residual {residual.min():.3e} "
            f"negative beyond {tol_c:.1e}; not a supersolution"
        )
    slack = np.minimum(residual, gap[:n])
    if np.max(np.abs(slack)) > tol_c:
        raise ObstacleViolation(
            f"rung {rung_label or c}: complementarity defect "
            f"{np.max(np.abs(slack)):.3e} beyond {tol_c:.1e}"
        )

    v_prime = np.where(
        mask,
        prev.v_prime.values,
        ((m.r + m.lam) * v - t + h - c) / (m.mu - c),
    )
    return ValueSlice(
        rate=c,
        v=GridFn(v, grid),
        v_prime=GridFn(v_prime, grid),
        switch_mask=mask,
        iterations=iterations,
        final_update_norm=update,
    )


def solve_ladder(
    m: ModelParams,
    d: ClaimDistribution,
    grid: Grid,
    ladder: RateLadder,
    update_tol: float = 1e-10,
    residual_tol: float = 1e-8,
    max_iter: int = 10000,
    method: str = "auto",
    boundary: BoundarySolution | None = None,
) -> tuple[list[ValueSlice], LadderDiagnostics]:
    """Solve every rung from the cap rate down to the floor.

    Rung 0 is the boundary solution g (solved here unless supplied).  Each
    later rung warm-starts from its predecessor.  Raises DomainTooSmall if
    any rung's contact set only begins beyond 0.8 L, since then the free
    boundary is not resolved inside the domain.
    """
    if ladder.c_bar != m.c_bar or ladder.c_floor != m.c_floor:
        raise ValidationError("ladder rate range must match the model's")
    if boundary is None:
        boundary = solve_g(
            m, d, grid,
            update_tol=update_tol, residual_tol=residual_tol,
            max_iter=max_iter, method=method,
        )
    n = grid.n_x
    base = ValueSlice(
        rate=m.c_bar,
        v=boundary.g,
        v_prime=boundary.g_prime,
        switch_mask=np.ones(n + 1, dtype=bool),
        iterations=boundary.picard_iterations,
        final_update_norm=boundary.final_update_norm,
    )
    slices = [base]
    threshold = EPS_EQ * max(ladder.dc, grid.dx)
    rates = ladder.rates
    cut = 0.8 * grid.L
    for i in range(1, ladder.n + 1):
        s = solve_rung(
            slices[-1], float(rates[i]), m, d, grid,
            update_tol=update_tol, max_iter=max_iter, method=method,
            mask_threshold=threshold, rung_label=f"{i}/{ladder.n}",
        )
        first = int(np.argmax(s.switch_mask))
        if not s.switch_mask[first] or first * grid.dx > cut:
            raise DomainTooSmall(
                f"rung {i} (rate {rates[i]:.6g}): no switch node at or below "
                f"0.8 L = {cut:.6g}; enlarge the domain"
            )
        slices.append(s)

    dc = ladder.dc
    vals = np.stack([s.v.values for s in slices])
    u = np.diff(vals, axis=0) / dc
    sd = vals[:, 2:] - 2.0 * vals[:, 1:-1] + vals[:, :-2]
    diag = LadderDiagnostics(
        rates=rates,
        iterations=np.array([s.iterations for s in slices]),
        update_norms=np.array([s.final_update_norm for s in slices]),
        u_sup=u.max(axis=1) if ladder.n else np.zeros(0),
        u_min=u.min(axis=1) if ladder.n else np.zeros(0),
        second_diff_min=sd.min(axis=1),
        dc=dc,
        slope_growth_bound=slope_growth_bound(m),
    )
    return slices, diag
