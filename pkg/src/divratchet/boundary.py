"""Value of paying dividends at the cap forever (the ladder's bottom rung).

g solves the linear integro-differential boundary problem

    -(mu - c_bar) g' + (r + lam) g - T g + h - c_bar = 0   on (0, L),
    g(L) = c_bar / r,

discretized with the upwind difference and the product-integration jump
operator.  Node 0 needs no special casing: T carries the reflected mass
f(0)(1 - F(x)) and the same difference equation holds there.

The solve freezes T at the previous iterate and back-substitutes from the
Dirichlet node (Picard); the iteration map contracts in sup norm with
factor at most lam / (r + lam).  Known envelope, used by the checks:

    (c_bar - lam*ell*gamma)/r <= g <= c_bar/r,   0 <= g' <= ell,   g'' <= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._sweep import backward_linear_solve
from .discretization import Grid, GridFn, get_kernel, residual_Lc, second_diff
from .errors import NoConvergence
from .model import ClaimDistribution, ModelParams, h_eval


@dataclass
class BoundarySolution:
    """Converged bottom-rung value with its upwind derivative and solve stats."""

    g: GridFn
    g_prime: GridFn
    picard_iterations: int
    final_update_norm: float
    residual_sup: float


def solve_g(
    m: ModelParams,
    d: ClaimDistribution,
    grid: Grid,
    update_tol: float = 1e-10,
    residual_tol: float = 1e-8,
    max_iter: int = 10000,
    method: str = "auto",
) -> BoundarySolution:
    """Picard-iterate the frozen-T upwind scheme to its fixed point.

    Starts from the constant c_bar/r (the value of the cap strategy with no
    claims, an upper bound).  Stops when the sup-norm update falls below
    update_tol; the achieved scheme residual is then checked against
    residual_tol.  Raises NoConvergence on either failure.
    """
    n = grid.n_x
    dx = grid.dx
    kern = get_kernel(d, grid)
    h = h_eval(m, d, grid.nodes)
    a = (m.mu - m.c_bar) / dx
    b = a + m.r + m.lam
    qt = a / b
    v_L = m.c_bar / m.r

    v = np.full(n + 1, v_L)
    update = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        t = m.lam * (kern.convolve(v, method) + v[0] * kern.tail)
        phi = t - h + m.c_bar
        v_new = backward_linear_solve(phi[:n] / b, qt, v_L)
        update = float(np.max(np.abs(v_new - v)))
        v = v_new
        if update <= update_tol:
            break
    else:
        raise NoConvergence(
            f"g solve: sup-norm update {update:.3e} still above {update_tol:.1e} "
            f"after {max_iter} sweeps (contraction estimate "
            f"{m.lam / (m.r + m.lam):.4f})",
            iterations=max_iter,
            update_norm=update,
        )

    g = GridFn(v, grid)
    g_prime = GridFn(_upwind_derivative(m, d, grid, v, h, method), grid)
    res = residual_Lc(m, d, m.c_bar, g, g_prime, method=method).values
    residual_sup = float(np.max(np.abs(res[:n])))
    if residual_sup > residual_tol:
        raise NoConvergence(
            f"g solve: updates converged but the scheme residual {residual_sup:.3e} "
            f"exceeds {residual_tol:.1e}; the grid or tolerances are inconsistent",
            iterations=iterations,
            update_norm=update,
            residual=residual_sup,
        )
    return BoundarySolution(
        g=g,
        g_prime=g_prime,
        picard_iterations=iterations,
        final_update_norm=update,
        residual_sup=residual_sup,
    )


def _upwind_derivative(m, d, grid, v, h, method):
    """Forward differences on the interior; the Dirichlet node takes the
    derivative the equation itself implies there."""
    n = grid.n_x
    dp = np.empty(n + 1)
    dp[:n] = (v[1:] - v[:n]) / grid.dx
    kern = get_kernel(d, grid)
    t_L = m.lam * (kern.convolve(v, method)[n] + v[0] * kern.tail[n])
    dp[n] = ((m.r + m.lam) * v[n] - t_L + h[n] - m.c_bar) / (m.mu - m.c_bar)
    return dp


def boundary_residual_report(
    sol: BoundarySolution, m: ModelParams, d: ClaimDistribution
) -> dict:
    """Per-node arrays plus the envelope margins, for export and gating."""
    grid = sol.g.grid
    n = grid.n_x
    g = sol.g.values
    res = residual_Lc(m, d, m.c_bar, sol.g, sol.g_prime, method="direct").values
    lower = (m.c_bar - m.lam * m.ell * d.gamma) / m.r
    upper = m.c_bar / m.r
    return {
        "x": grid.nodes,
        "g": g,
        "g_prime": sol.g_prime.values,
        "residual": res,
        "residual_sup_interior": float(np.max(np.abs(res[:n]))),
        "lower_bound": lower,
        "upper_bound": upper,
        "g_min": float(g.min()),
        "g_max": float(g.max()),
        "g_prime_min": float(sol.g_prime.values.min()),
        "g_prime_max": float(sol.g_prime.values.max()),
        "second_diff_max": float(second_diff(g).max()),
        "dirichlet_gap": float(abs(g[n - 1] - upper)),
        "iterations": sol.picard_iterations,
        "final_update_norm": sol.final_update_norm,
    }
