"""Run configuration: YAML loading, validation, and canonical hashing.

The params hash covers every numeric input that changes solver output
(model, claims, grid, ladder, solver tolerances, convolution method) and
deliberately excludes seed, path count, horizon, and output paths, which
affect only simulation estimates, never the cached surface.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import yaml

from .discretization import Grid
from .errors import ParseError, ValidationError
from .ladder import RateLadder
from .model import (
    ClaimDistribution,
    Exponential,
    HyperExponential,
    ModelParams,
    ShiftedPareto,
    make_distribution,
)

_METHODS = ("auto", "direct", "recursive", "fft")


def claims_spec(d: ClaimDistribution) -> tuple[str, dict]:
    """Config-style (kind, params) for a distribution, inverse of
    make_distribution."""
    if isinstance(d, Exponential):
        return "exponential", {"gamma": d.gamma_mean}
    if isinstance(d, HyperExponential):
        return "hyperexponential", {
            "weights": list(d.weights),
            "means": list(d.means),
        }
    if isinstance(d, ShiftedPareto):
        return "shifted_pareto", {"alpha": d.alpha, "theta": d.theta}
    raise ValidationError(f"unknown claim distribution type {type(d).__name__}")


@dataclass
class RunConfig:
    """Validated inputs for one solver/simulation run."""

    model: ModelParams
    claims: ClaimDistribution
    grid: Grid
    ladder: RateLadder
    update_tol: float = 1e-10
    residual_tol: float = 1e-8
    max_iter: int = 10000
    method: str = "auto"
    paths: int = 100000
    seed: int = 20240901
    horizon: float | None = None
    out_dir: str = "."

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValidationError(
                f"solver.method must be one of {_METHODS}, got {self.method!r}"
            )
        if not self.update_tol > 0:
            raise ValidationError("solver.update_tol must be positive")
        if not self.residual_tol > 0:
            raise ValidationError("solver.residual_tol must be positive")
        if self.max_iter < 1:
            raise ValidationError("solver.max_iter must be at least 1")
        if self.paths < 2:
            raise ValidationError("simulate.paths must be at least 2")
        if self.horizon is not None and not self.horizon > 0:
            raise ValidationError("simulate.horizon must be positive when set")
        if self.ladder.c_bar != self.model.c_bar or self.ladder.c_floor != self.model.c_floor:
            raise ValidationError("ladder endpoints must match the model's rate window")

    @property
    def params_hash(self) -> str:
        """sha256 over the canonical little-endian packing of all numeric
        fields that determine the solved surface."""
        m = self.model
        buf = bytearray(b"divratchet-surface-v1")
        buf += struct.pack(
            "<6d", m.mu, m.lam, m.r, m.ell, m.c_bar, m.c_floor
        )
        kind, params = claims_spec(self.claims)
        buf += kind.encode()
        for key in sorted(params):
            val = params[key]
            vals = val if isinstance(val, (list, tuple)) else [val]
            buf += key.encode()
            buf += struct.pack(f"<{len(vals)}d", *[float(x) for x in vals])
        buf += struct.pack("<dQQ", self.grid.L, self.grid.n_x, self.ladder.n)
        buf += struct.pack("<d", self.update_tol)
        buf += self.method.encode()
        return hashlib.sha256(bytes(buf)).hexdigest()


def _section(doc: dict, name: str, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ValidationError(f"missing config section {name!r}")
        return {}
    if not isinstance(sec, dict):
        raise ValidationError(f"config section {name!r} must be a mapping")
    return sec


def _num(sec: dict, section: str, key: str, cast=float, default=None):
    if key not in sec:
        if default is not None:
            return default
        raise ValidationError(f"{section}.{key} is required")
    try:
        return cast(sec[key])
    except (TypeError, ValueError):
        raise ValidationError(
            f"{section}.{key} must be a {cast.__name__}, got {sec[key]!r}"
        ) from None


def load_config(path: str) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise ParseError(f"cannot read config {path}: {e}") from None
    except yaml.YAMLError as e:
        raise ParseError(f"cannot parse config {path}: {e}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"config {path} must be a YAML mapping")
    return config_from_mapping(doc)


def config_from_mapping(doc: dict) -> RunConfig:
    """Validate an already-parsed configuration mapping."""
    msec = _section(doc, "model")
    model = ModelParams(
        mu=_num(msec, "model", "mu"),
        lam=_num(msec, "model", "lam"),
        r=_num(msec, "model", "r"),
        ell=_num(msec, "model", "ell"),
        c_bar=_num(msec, "model", "c_bar"),
        c_floor=_num(msec, "model", "c_floor", default=0.0),
    )

    csec = _section(doc, "claims")
    if "kind" not in csec:
        raise ValidationError("claims.kind is required")
    params = {k: v for k, v in csec.items() if k != "kind"}
    claims = make_distribution(csec["kind"], params)

    gsec = _section(doc, "grid")
    grid = Grid(
        L=_num(gsec, "grid", "L"),
        n_x=_num(gsec, "grid", "n_x", cast=int),
    )

    lsec = _section(doc, "ladder")
    ladder = RateLadder(
        c_bar=model.c_bar,
        c_floor=model.c_floor,
        n=_num(lsec, "ladder", "n", cast=int),
    )

    ssec = _section(doc, "solver", required=False)
    simsec = _section(doc, "simulate", required=False)
    osec = _section(doc, "output", required=False)
    horizon = simsec.get("horizon")
    if horizon is not None:
        horizon = _num(simsec, "simulate", "horizon")

    return RunConfig(
        model=model,
        claims=claims,
        grid=grid,
        ladder=ladder,
        update_tol=_num(ssec, "solver", "update_tol", default=1e-10),
        residual_tol=_num(ssec, "solver", "residual_tol", default=1e-8),
        max_iter=_num(ssec, "solver", "max_iter", cast=int, default=10000),
        method=str(ssec.get("method", "auto")),
        paths=_num(simsec, "simulate", "paths", cast=int, default=100000),
        seed=_num(simsec, "simulate", "seed", cast=int, default=20240901),
        horizon=horizon,
        out_dir=str(osec.get("dir", ".")),
    )
