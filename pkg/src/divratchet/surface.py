"""Assembled value surface and the feedback objects read off from it.

The surface stacks the ladder slices into a (n+1) x (n_x+1) lattice over
(rate, x).  Three consumers:

  * value_at(x, c): bilinear interpolation on the lattice, extended by
    v(0, c) + ell*x for x < 0 (injection linearity) and by c_bar/r for
    x > L (the Dirichlet far field).
  * extract_boundary: per rung, the first node where the rung equals its
    predecessor - the switching threshold x*(c_i).  Everything to the
    right must also be in contact (the switch region is an upper set).
  * equivalent_max_rate: the highest ladder rate whose value the point
    (x, c_i) already attains, found by chaining contact masks upward; this
    is the feedback control the ratcheting simulation executes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundarySolution
from .discretization import Grid
from .errors import DomainTooSmall, RateOutOfRange, ValidationError
from .ladder import RateLadder, ValueSlice
from .model import ModelParams


@dataclass
class FreeBoundaryCurve:
    """Switching thresholds x*(c_i) per rung, with consistency counters.

    Rung 0 has no rung above it to switch to; its entry mirrors rung 1 as
    the cap-rate limit stand-in.  up_closure_violations[i] counts nodes
    right of x*(c_i) that are unexpectedly off-contact (must be 0 for a
    healthy surface).
    """

    rates: np.ndarray
    x_star: np.ndarray
    up_closure_violations: np.ndarray
    gradient_at_zero: np.ndarray


@dataclass
class RateMap:
    """Equivalent maximum rate on the lattice: values[i, j] is the highest
    ladder rate whose rung value coincides with rung i's at node j."""

    rates: np.ndarray
    grid: Grid
    values: np.ndarray


class ValueSurface:
    """Value function lattice with metadata for caching and simulation."""

    def __init__(
        self,
        m: ModelParams,
        grid: Grid,
        ladder: RateLadder,
        slices: list[ValueSlice],
        params_hash: str = "",
    ):
        if len(slices) != ladder.n + 1:
            raise ValidationError("surface needs one slice per ladder rung")
        self.m = m
        self.grid = grid
        self.ladder = ladder
        self.rates = ladder.rates
        self.v = np.ascontiguousarray(np.stack([s.v.values for s in slices]))
        self.v_prime = np.ascontiguousarray(np.stack([s.v_prime.values for s in slices]))
        self.masks = np.ascontiguousarray(np.stack([s.switch_mask for s in slices]))
        self.iterations = np.array([s.iterations for s in slices], dtype=np.int64)
        self.update_norms = np.array([s.final_update_norm for s in slices])
        self.params_hash = params_hash

    @classmethod
    def from_solution(
        cls,
        m: ModelParams,
        grid: Grid,
        ladder: RateLadder,
        slices: list[ValueSlice],
        boundary: BoundarySolution | None = None,
        params_hash: str = "",
    ) -> "ValueSurface":
        return cls(m, grid, ladder, slices, params_hash)

    def _rate_index(self, c: float) -> tuple[int, float]:
        lad = self.ladder
        if c > lad.c_bar + 1e-12 or c < lad.c_floor - 1e-12:
            raise RateOutOfRange(
                f"rate {c} outside [{lad.c_floor}, {lad.c_bar}]"
            )
        pos = (lad.c_bar - c) / lad.dc
        i = int(np.clip(np.floor(pos), 0, lad.n - 1))
        t = float(np.clip(pos - i, 0.0, 1.0))
        return i, t

    def row_at_rate(self, c: float) -> np.ndarray:
        """Value row at rate c, linear in c between neighboring rungs."""
        i, t = self._rate_index(c)
        if t == 0.0:
            return self.v[i]
        if t == 1.0:
            return self.v[i + 1]
        return (1.0 - t) * self.v[i] + t * self.v[i + 1]

    def value_at(self, x: float, c: float) -> float:
        """Interpolated value; exact at lattice points.

        x < 0 extends linearly with slope ell (mandatory injection),
        x > L returns the far-field level c_bar/r.
        """
        row = self.row_at_rate(c)
        if x < 0.0:
            return float(row[0] + self.m.ell * x)
        if x >= self.grid.L:
            return float(self.m.c_bar / self.m.r)
        pos = x / self.grid.dx
        j = int(np.floor(pos))
        s = pos - j
        if s == 0.0:
            return float(row[j])
        return float((1.0 - s) * row[j] + s * row[j + 1])


def extract_boundary(surface: ValueSurface) -> FreeBoundaryCurve:
    """Per-rung switching threshold: first contact node times dx.

    Raises DomainTooSmall when a rung's contact set only starts beyond
    0.8 L (the threshold is then not trusted).
    """
    grid = surface.grid
    n_r = surface.ladder.n
    dx = grid.dx
    cut = 0.8 * grid.L
    x_star = np.empty(n_r + 1)
    viol = np.zeros(n_r + 1, dtype=np.int64)
    for i in range(1, n_r + 1):
        mask = surface.masks[i]
        first = int(np.argmax(mask))
        if not mask[first] or first * dx > cut:
            raise DomainTooSmall(
                f"rung {i} (rate {surface.rates[i]:.6g}): no contact node at or "
                f"below 0.8 L = {cut:.6g}"
            )
        x_star[i] = first * dx
        viol[i] = int(np.sum(~mask[first:]))
    x_star[0] = x_star[1] if n_r >= 1 else 0.0
    return FreeBoundaryCurve(
        rates=surface.rates.copy(),
        x_star=x_star,
        up_closure_violations=viol,
        gradient_at_zero=surface.v_prime[:, 0].copy(),
    )


def build_rate_map(surface: ValueSurface) -> RateMap:
    """Chain contact masks upward: node j at rung i maps to rung i - k where
    k is the length of the run of contacts directly above."""
    masks = surface.masks
    n_r = surface.ladder.n
    n_nodes = surface.grid.n_x + 1
    run = np.zeros(n_nodes, dtype=np.int64)
    out = np.empty((n_r + 1, n_nodes))
    out[0] = surface.rates[0]
    for i in range(1, n_r + 1):
        run = np.where(masks[i], run + 1, 0)
        out[i] = surface.rates[i - run]
    return RateMap(rates=surface.rates.copy(), grid=surface.grid, values=out)


def equivalent_max_rate(surface: ValueSurface, x: float, c: float, rate_map: RateMap | None = None) -> float:
    """Highest rate whose rung value matches the current one at x.

    The rate argument snaps up to the enclosing rung (ratcheting must not
    round the floor down); x snaps to its node cell, making the map
    right-continuous in x.  Beyond the largest threshold the answer is the
    cap rate.
    """
    if rate_map is None:
        rate_map = build_rate_map(surface)
    lad = surface.ladder
    if c > lad.c_bar + 1e-12 or c < lad.c_floor - 1e-12:
        raise RateOutOfRange(f"rate {c} outside [{lad.c_floor}, {lad.c_bar}]")
    i = int(np.clip(np.floor((lad.c_bar - c) / lad.dc + 1e-9), 0, lad.n))
    if x >= surface.grid.L:
        return float(surface.rates[0])
    j = int(np.clip(np.floor(x / surface.grid.dx), 0, surface.grid.n_x))
    return float(rate_map.values[i, j])
