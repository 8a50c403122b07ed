"""Obstacle-chain tests.

The dense reference solver below (`howard_reference`) solves the same
discrete complementarity system by policy iteration with direct dense
solves - finitely convergent for M-matrices - and is the independent check
that the projected-sweep Picard iteration lands on the right solution.
"""

import numpy as np
import pytest

from divratchet import (
    DomainTooSmall,
    Exponential,
    Grid,
    ModelParams,
    NoConvergence,
    ValidationError,
    h_eval,
)
from divratchet.boundary import solve_g
from divratchet.discretization import get_kernel
from divratchet.ladder import (
    RateLadder,
    ValueSlice,
    slope_growth_bound,
    solve_ladder,
    solve_rung,
)

M1 = ModelParams(mu=2.0, lam=1.0, r=0.1, ell=1.2, c_bar=1.0, c_floor=0.0)
D1 = Exponential(0.5)
M2 = ModelParams(mu=2.0, lam=2.0, r=0.1, ell=2.0, c_bar=1.2, c_floor=0.0)
D2 = Exponential(0.6)
G2 = Grid(L=20.0, n_x=800)


@pytest.fixture(scope="module")
def ladder2():
    return solve_ladder(M2, D2, G2, RateLadder(64, 1.2, 0.0), update_tol=1e-11)


def dense_system(m, d, grid, c, v_L):
    """Full matrix of the frozen scheme row by row, for the reference solver."""
    n = grid.n_x
    kern = get_kernel(d, grid)
    a = (m.mu - c) / grid.dx
    b = a + m.r + m.lam
    size = n + 1
    A = np.zeros((size, size))
    for j in range(n):
        A[j, j] += b
        A[j, j + 1] -= a
        # T row: convolution weights plus the reflected-tail column
        for k in range(j + 1):
            A[j, k] -= m.lam * kern.w[j - k]
        A[j, 0] += m.lam * kern.b_corr[j]
        A[j, 0] -= m.lam * kern.tail[j]
    A[n, n] = 1.0
    rhs = np.empty(size)
    rhs[:n] = c - h_eval(m, d, grid.nodes[:n])
    rhs[n] = v_L
    return A, rhs


def howard_reference(m, d, grid, c, psi, v_L):
    """Policy iteration on min(A v - rhs, v - psi) = 0; exact dense solves."""
    A, rhs = dense_system(m, d, grid, c, v_L)
    n = grid.n_x
    size = n + 1
    eye = np.eye(size)
    contact = np.zeros(size, dtype=bool)
    v = None
    for _ in range(200):
        rows = np.where(contact[:, None], eye, A)
        b_eff = np.where(contact, psi, rhs)
        v = np.linalg.solve(rows, b_eff)
        res = A @ v - rhs
        new_contact = (v - psi) < res
        new_contact[n] = False  # Dirichlet row stays linear
        if np.array_equal(new_contact, contact):
            return v
        contact = new_contact
    raise AssertionError("reference policy iteration failed to settle")


class TestRateLadder:
    def test_rates_hit_endpoints(self):
        lad = RateLadder(256, 1.0, 0.0)
        assert lad.rates[0] == 1.0
        assert lad.rates[-1] == 0.0
        assert lad.dc == pytest.approx(1.0 / 256)
        assert np.all(np.diff(lad.rates) < 0)

    def test_validation(self):
        with pytest.raises(ValidationError):
            RateLadder(0, 1.0, 0.0)
        with pytest.raises(ValidationError):
            RateLadder(8, 1.0, 1.0)

    def test_model_mismatch(self):
        with pytest.raises(ValidationError):
            solve_ladder(M1, D1, Grid(L=20.0, n_x=100), RateLadder(4, 0.9, 0.0))


class TestDegenerateChain:
    """For the first parameter set g already dominates every lower rate
    (its gradient at zero stays below 1), so each rung reproduces g."""

    def test_all_rungs_equal_g(self):
        grid = Grid(L=30.0, n_x=800)
        slices, diag = solve_ladder(M1, D1, grid, RateLadder(32, 1.0, 0.0), update_tol=1e-12)
        g = slices[0].v.values
        for s in slices[1:]:
            assert np.array_equal(s.v.values, g)
            assert s.switch_mask.all()
        assert diag.u_sup.max() == 0.0


class TestAgainstDenseReference:
    def test_rung_matches_howard(self):
        grid = Grid(L=12.0, n_x=96)
        base = solve_g(M2, D2, grid, update_tol=1e-13)
        prev = ValueSlice(
            rate=M2.c_bar,
            v=base.g,
            v_prime=base.g_prime,
            switch_mask=np.ones(grid.n_x + 1, dtype=bool),
        )
        for c in (1.0, 0.8, 0.6):
            s = solve_rung(prev, c, M2, D2, grid, update_tol=1e-13)
            ref = howard_reference(M2, D2, grid, c, prev.v.values, prev.v.values[-1])
            assert np.max(np.abs(s.v.values - ref)) < 1e-9
            prev = s

    def test_scheme_matrix_is_monotone(self):
        # off-diagonals nonpositive, diagonally dominant with row sums >= r:
        # the structure behind the obstacle-monotonicity of the solution
        grid = Grid(L=12.0, n_x=96)
        A, _ = dense_system(M2, D2, grid, 0.6, 10.0)
        off = A - np.diag(np.diag(A))
        assert off.max() <= 1e-14
        assert np.diag(A).min() > 0
        assert A[:-1].sum(axis=1).min() >= M2.r - 1e-10


class TestChainStructure:
    def test_obstacle_order_bitwise(self, ladder2):
        slices, _ = ladder2
        for lo, hi in zip(slices[:-1], slices[1:]):
            assert np.all(hi.v.values >= lo.v.values)

    def test_masks_up_closed(self, ladder2):
        slices, _ = ladder2
        for s in slices:
            m = s.switch_mask
            first = int(np.argmax(m))
            assert m[first:].all()

    def test_switch_gain_bounds(self, ladder2):
        _, diag = ladder2
        cap = (M2.ell - 1.0) / M2.r
        assert diag.u_min.min() >= 0.0
        assert diag.u_sup.max() <= cap + 1e-6

    def test_switch_gain_growth(self, ladder2):
        slices, diag = ladder2
        vals = np.stack([s.v.values for s in slices])
        u = np.diff(vals, axis=0) / diag.dc
        growth = u[:-1] - u[1:]  # u_{i-1} - u_i
        assert growth.max() <= slope_growth_bound(M2) * diag.dc + 1e-6

    def test_curvature_lower_bound(self, ladder2):
        _, diag = ladder2
        bound = -M2.lam * M2.ell / (M2.mu - M2.c_bar)
        assert diag.second_diff_min.min() / G2.dx**2 >= bound - 1e-6

    def test_complementarity(self, ladder2):
        slices, _ = ladder2
        kern = get_kernel(D2, G2)
        h = h_eval(M2, D2, G2.nodes)
        n = G2.n_x
        for prev, s in zip(slices[:-1], slices[1:]):
            v = s.v.values
            t = M2.lam * (kern.convolve(v, "auto") + v[0] * kern.tail)
            res = (
                -(M2.mu - s.rate) * np.diff(v) / G2.dx
                + (M2.r + M2.lam) * v[:n]
                - t[:n]
                + h[:n]
                - s.rate
            )
            gap = v[:n] - prev.v.values[:n]
            assert res.min() >= -1e-8
            assert np.max(np.abs(np.minimum(res, gap))) <= 1e-8

    def test_dyadic_refinement_monotone(self, ladder2):
        slices64, _ = ladder2
        slices32, _ = solve_ladder(M2, D2, G2, RateLadder(32, 1.2, 0.0), update_tol=1e-11)
        worst = max(
            float(np.max(slices32[i].v.values - slices64[2 * i].v.values))
            for i in range(33)
        )
        assert worst <= 1e-7

    def test_floor_extension_leaves_upper_rungs(self, ladder2):
        slices64, _ = ladder2
        m_ext = ModelParams(mu=2.0, lam=2.0, r=0.1, ell=2.0, c_bar=1.2, c_floor=-0.6)
        slices96, _ = solve_ladder(
            m_ext, D2, G2, RateLadder(96, 1.2, -0.6), update_tol=1e-11
        )
        for i in range(65):
            assert np.max(np.abs(slices64[i].v.values - slices96[i].v.values)) <= 1e-9


class TestFailureModes:
    def test_domain_too_small(self):
        with pytest.raises(DomainTooSmall, match="rung"):
            solve_ladder(M2, D2, Grid(L=5.0, n_x=200), RateLadder(16, 1.2, 0.0))

    def test_rung_no_convergence_labels_rung(self):
        grid = Grid(L=20.0, n_x=400)
        base = solve_g(M2, D2, grid, update_tol=1e-11)
        with pytest.raises(NoConvergence, match="rung 1/"):
            solve_ladder(
                M2, D2, grid, RateLadder(8, 1.2, 0.0), max_iter=1, boundary=base
            )
