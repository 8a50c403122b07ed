"""Model parameters and claim-size distributions.

The surplus process earns premium income mu, pays dividends at a ratcheted
rate C_t in [c, c_bar], suffers compound-Poisson claims with intensity lam,
and is kept nonnegative by capital injections priced at ell > 1 per unit.
Everything downstream consumes two objects defined here: ModelParams and a
ClaimDistribution.

Supported claim families are Exponential, HyperExponential and ShiftedPareto.
All three have positive, bounded, non-increasing densities on (0, inf) and a
finite mean, which is the admissibility class the solver relies on; arbitrary
user densities are rejected because that property cannot be checked cheaply.

The tail function

    h(x) = lam * ell * E[(Z - x)^+]

feeds every equation in the solver; it is evaluated in closed form for each
family (h(0) = lam*ell*gamma, h' = -lam*ell*(1 - F)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ValidationError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class ModelParams:
    """Economic constants of the control problem.

    Attributes:
        mu: premium income rate, mu > 0.
        lam: Poisson claim intensity, lam > 0 (config key "lambda").
        r: discount rate, r > 0.
        ell: cost per unit of injected capital, ell > 1.
        c_bar: maximal dividend rate, 0 < c_bar < mu.
        c_floor: lower end of the computed rate ladder, c_floor < c_bar.
            May be negative; the solution on rates in [0, c_bar] does not
            depend on it.
    """

    mu: float
    lam: float
    r: float
    ell: float
    c_bar: float
    c_floor: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValidationError("mu must be positive")
        if not self.lam > 0:
            raise ValidationError("lambda must be positive")
        if not self.r > 0:
            raise ValidationError("r must be positive")
        if not self.ell > 1:
            raise ValidationError("ell must exceed 1")
        if not 0 < self.c_bar < self.mu:
            raise ValidationError("c_bar must lie strictly between 0 and mu")
        if not self.c_floor < self.c_bar:
            raise ValidationError("c_floor must lie strictly below c_bar")


class ClaimDistribution:
    """Common interface of the supported claim-size families.

    Subclasses provide vectorized density/cdf/partial-moment evaluation,
    the mean tail integral E[(Z - x)^+], and an exact single-uniform
    sampling transform for the simulator.
    """

    kind: str = ""

    @property
    def gamma(self) -> float:
        """Mean claim size E[Z]."""
        raise NotImplementedError

    def density(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def cdf(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def partial_moment(self, x: ArrayLike) -> ArrayLike:
        """integral of t*p(t) over [0, x]; tends to gamma as x -> inf."""
        raise NotImplementedError

    def tail_mean(self, x: ArrayLike) -> ArrayLike:
        """E[(Z - x)^+] = integral of (1 - F) over [x, inf)."""
        raise NotImplementedError

    def sample_from_uniform(self, u: ArrayLike) -> ArrayLike:
        """Map U(0,1) draws to claim sizes; exact, monotone per branch."""
        raise NotImplementedError

    def exp_components(self):
        """(weights, means) when the density is a finite exponential
        mixture, else None.  Enables the O(n) convolution recursion."""
        return None

    def params_key(self) -> tuple:
        """Numeric identity for hashing/caching."""
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(ClaimDistribution):
    """Exponential claims with mean gamma_mean."""

    gamma_mean: float
    kind: str = field(default="exponential", init=False)

    def __post_init__(self):
        if not 0 < self.gamma_mean < np.inf:
            raise ValidationError("exponential mean must be positive and finite")

    @property
    def gamma(self) -> float:
        return self.gamma_mean

    def density(self, x):
        return np.exp(-np.asarray(x, float) / self.gamma_mean) / self.gamma_mean

    def cdf(self, x):
        return -np.expm1(-np.asarray(x, float) / self.gamma_mean)

    def partial_moment(self, x):
        x = np.asarray(x, float)
        g = self.gamma_mean
        return g - (x + g) * np.exp(-x / g)

    def tail_mean(self, x):
        return self.gamma_mean * np.exp(-np.asarray(x, float) / self.gamma_mean)

    def sample_from_uniform(self, u):
        return -self.gamma_mean * np.log1p(-np.asarray(u, float))

    def exp_components(self):
        return np.array([1.0]), np.array([self.gamma_mean])

    def params_key(self):
        return (self.kind, self.gamma_mean)


@dataclass(frozen=True)
class HyperExponential(ClaimDistribution):
    """Finite mixture of exponentials: weights w_k > 0 summing to 1,
    component means gamma_k > 0."""

    weights: tuple
    means: tuple
    kind: str = field(default="hyperexponential", init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, float)
        g = np.asarray(self.means, float)
        if w.ndim != 1 or g.ndim != 1 or w.size != g.size or w.size == 0:
            raise ValidationError("weights and means must be equal-length nonempty sequences")
        if not np.all(w > 0):
            raise ValidationError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("mixture weights must sum to 1")
        if not np.all((g > 0) & np.isfinite(g)):
            raise ValidationError("mixture means must be positive and finite")
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        object.__setattr__(self, "means", tuple(float(v) for v in g))

    @property
    def gamma(self) -> float:
        return float(np.dot(self.weights, self.means))

    def _wg(self):
        return np.asarray(self.weights), np.asarray(self.means)

    def density(self, x):
        x = np.asarray(x, float)
        w, g = self._wg()
        return np.sum(w / g * np.exp(-x[..., None] / g), axis=-1)

    def cdf(self, x):
        x = np.asarray(x, float)
        w, g = self._wg()
        return np.sum(-w * np.expm1(-x[..., None] / g), axis=-1)

    def partial_moment(self, x):
        x = np.asarray(x, float)
        w, g = self._wg()
        return np.sum(w * (g - (x[..., None] + g) * np.exp(-x[..., None] / g)), axis=-1)

    def tail_mean(self, x):
        x = np.asarray(x, float)
        w, g = self._wg()
        return np.sum(w * g * np.exp(-x[..., None] / g), axis=-1)

    def sample_from_uniform(self, u):
        # True quantile function, so common random numbers couple
        # monotonically across distributions.  The mixture cdf is increasing
        # and concave, hence Newton started at 0 climbs monotonically to the
        # root; far from the root each step advances ~max(means), so the
        # iteration count is O(log(1/(1-u))).
        u = np.asarray(u, float)
        scalar = u.ndim == 0
        u = np.clip(np.atleast_1d(u), 0.0, 1.0 - 1e-16)
        x = np.zeros_like(u)
        for _ in range(200):
            step = (u - self.cdf(x)) / self.density(x)
            x += step
            if np.max(step) <= 1e-14 * (1.0 + np.max(x)):
                break
        return x[0] if scalar else x

    def exp_components(self):
        return np.asarray(self.weights), np.asarray(self.means)

    def params_key(self):
        return (self.kind, self.weights, self.means)


@dataclass(frozen=True)
class ShiftedPareto(ClaimDistribution):
    """Pareto density shifted to the origin: p(x) = alpha*theta^alpha /
    (x + theta)^(alpha + 1), alpha > 1 for a finite mean."""

    alpha: float
    theta: float
    kind: str = field(default="shifted_pareto", init=False)

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValidationError("pareto alpha must exceed 1 (finite mean)")
        if not self.theta > 0:
            raise ValidationError("pareto theta must be positive")

    @property
    def gamma(self) -> float:
        return self.theta / (self.alpha - 1.0)

    def density(self, x):
        x = np.asarray(x, float)
        return self.alpha * self.theta**self.alpha / (x + self.theta) ** (self.alpha + 1.0)

    def cdf(self, x):
        x = np.asarray(x, float)
        return 1.0 - (self.theta / (x + self.theta)) ** self.alpha

    def partial_moment(self, x):
        x = np.asarray(x, float)
        a, th = self.alpha, self.theta
        u = x + th
        val = a * th**a * (u ** (1.0 - a) / (1.0 - a) + th * u**-a / a)
        return val + th / (a - 1.0)

    def tail_mean(self, x):
        x = np.asarray(x, float)
        a, th = self.alpha, self.theta
        return th**a * (x + th) ** (1.0 - a) / (a - 1.0)

    def sample_from_uniform(self, u):
        u = np.asarray(u, float)
        return self.theta * ((1.0 - u) ** (-1.0 / self.alpha) - 1.0)

    def params_key(self):
        return (self.kind, self.alpha, self.theta)


def density(d: ClaimDistribution, x: ArrayLike) -> ArrayLike:
    """Claim-size density p(x), non-increasing and bounded by p(0)."""
    return d.density(x)


def cdf(d: ClaimDistribution, x: ArrayLike) -> ArrayLike:
    """Claim-size distribution function F(x); F(0) = 0, F(inf) = 1."""
    return d.cdf(x)


def h_eval(m: ModelParams, d: ClaimDistribution, x: ArrayLike) -> ArrayLike:
    """Tail cost h(x) = lam * ell * E[(Z - x)^+].

    h(0) = lam*ell*gamma, h is non-increasing and convex with
    h'(x) = -lam*ell*(1 - F(x)), and 0 <= h <= lam*ell*gamma.
    """
    return m.lam * m.ell * d.tail_mean(x)


def make_distribution(kind: str, params: dict) -> ClaimDistribution:
    """Build a ClaimDistribution from config-style (kind, params).

    Kinds: "exponential" {gamma}, "hyperexponential" {weights, means},
    "shifted_pareto" {alpha, theta}.
    """
    kind = str(kind).lower()
    try:
        if kind == "exponential":
            return Exponential(gamma_mean=float(params["gamma"]))
        if kind == "hyperexponential":
            return HyperExponential(
                weights=tuple(float(w) for w in params["weights"]),
                means=tuple(float(g) for g in params["means"]),
            )
        if kind == "shifted_pareto":
            return ShiftedPareto(alpha=float(params["alpha"]), theta=float(params["theta"]))
    except KeyError as e:
        raise ValidationError(f"claims.params missing key {e.args[0]!r} for kind {kind!r}") from None
    raise ValidationError(
        f"unknown claims.kind {kind!r}; expected exponential, hyperexponential or shifted_pareto"
    )
