"""Backward substitution kernels for the upwind transport solves.

Each Picard stage freezes the nonlocal term and leaves a bidiagonal system

    b v_j = a v_{j+1} + phi_j   (interior j),    v_{n_x} = v_L,

with a = (mu - c)/dx and b = a + r + lam, i.e. v_j = alpha_j + qt v_{j+1}
with alpha = phi/b, qt = a/b in (0, 1).  The obstacle variant replaces the
affine step by v_j = max(alpha_j + qt v_{j+1}, psi_j), which solves the
frozen complementarity system exactly whenever the active set is an upper
set in x (Brennan-Schwartz sweep).

`projected_backward_scan` evaluates the same recursion with O(log n) numpy
passes: the map v -> max(A + Q v, P) is closed under composition,

    (A1,Q1,P1) o (A2,Q2,P2) = (A1 + Q1 A2, Q1 Q2, max(A1 + Q1 P2, P1)),

so a Hillis-Steele suffix scan composes all node maps and then applies the
boundary value once.  `reference_projected_sweep` is the plain loop kept
as the test oracle.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter


def backward_linear_solve(alpha: np.ndarray, qt: float, v_L: float) -> np.ndarray:
    """Solve v_j = alpha_j + qt*v_{j+1}, j = n-1..0, with v_n = v_L.

    Returns the full (n+1)-vector.  Runs as a linear filter on the
    reversed coefficients.
    """
    n = alpha.shape[0]
    x = alpha[::-1].copy()
    x[0] += qt * v_L
    w = lfilter([1.0], [1.0, -qt], x)
    out = np.empty(n + 1)
    out[:n] = w[::-1]
    out[n] = v_L
    return out


def projected_backward_scan(
    alpha: np.ndarray, qt: float, psi: np.ndarray, v_L: float
) -> np.ndarray:
    """Solve v_j = max(alpha_j + qt*v_{j+1}, psi_j), v_n = v_L.

    alpha and psi hold the interior coefficients (length n).  Exact (up to
    rounding) reformulation of the sequential recursion; every output node
    satisfies v_j >= psi_j by construction.
    """
    n = alpha.shape[0]
    a = alpha.astype(float, copy=True)
    q = np.full(n, qt)
    p = psi.astype(float, copy=True)
    s = 1
    while s < n:
        head = n - s
        a_new = a.copy()
        q_new = q.copy()
        p_new = p.copy()
        a_new[:head] = a[:head] + q[:head] * a[s:]
        p_new[:head] = np.maximum(a[:head] + q[:head] * p[s:], p[:head])
        q_new[:head] = q[:head] * q[s:]
        a, q, p = a_new, q_new, p_new
        s <<= 1
    out = np.empty(n + 1)
    out[:n] = np.maximum(a + q * v_L, p)
    out[n] = v_L
    return out


def reference_projected_sweep(
    alpha: np.ndarray, qt: float, psi: np.ndarray, v_L: float
) -> np.ndarray:
    """Sequential form of `projected_backward_scan`; test oracle."""
    n = alpha.shape[0]
    out = np.empty(n + 1)
    out[n] = v_L
    for j in range(n - 1, -1, -1):
        out[j] = max(alpha[j] + qt * out[j + 1], psi[j])
    return out
