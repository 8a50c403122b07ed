"""Command-line front end.

Subcommands: boundary, solve, boundary-curve, rate-map, simulate, verify,
sweep.  Every run starts from a YAML config (--config); results go to
--out or stdout.  CSV floats use repr round-trip formatting and a fixed
"\n" terminator so repeated runs are byte-identical; progress and cache
notices go to stderr only.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys

from .boundary import boundary_residual_report, solve_g
from .cache import read_surface, write_surface
from .config import RunConfig, config_from_mapping, load_config
from .discretization import Grid
from .errors import DivRatchetError, ParseError, ValidationError
from .ladder import RateLadder, solve_ladder
from .surface import ValueSurface, build_rate_map, extract_boundary
from . import simulate as sim
from .verify import (
    Certificate,
    calibrate_eps_disc,
    mc_cross_check,
    run_invariant_suite,
)

import yaml


def _fmt(v) -> str:
    # repr of a builtin float round-trips exactly; numpy scalars are
    # converted first so their wrapped repr never leaks into the CSV
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _write_rows(out_path: str | None, header: list, rows) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])

    if out_path is None:
        emit(sys.stdout)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            emit(fh)


def _write_text(out_path: str | None, text: str) -> None:
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")


def cache_path(cfg: RunConfig) -> str:
    return os.path.join(cfg.out_dir, f"surface-{cfg.params_hash[:16]}.bin")


def load_or_solve(cfg: RunConfig, force: bool = False):
    """Surface for the config, from the cache when the hash matches."""
    path = cache_path(cfg)
    if not force and os.path.exists(path):
        surface, d = read_surface(path)
        if surface.params_hash == cfg.params_hash:
            print(f"cache hit: {path}", file=sys.stderr)
            return surface, d
        print(f"cache stale (hash mismatch), re-solving: {path}", file=sys.stderr)
    slices, _ = solve_ladder(
        cfg.model,
        cfg.claims,
        cfg.grid,
        cfg.ladder,
        update_tol=cfg.update_tol,
        residual_tol=cfg.residual_tol,
        max_iter=cfg.max_iter,
        method=cfg.method,
    )
    surface = ValueSurface.from_solution(
        cfg.model, cfg.grid, cfg.ladder, slices, params_hash=cfg.params_hash
    )
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
    write_surface(path, surface, cfg.claims)
    return surface, cfg.claims


def cmd_boundary(args) -> int:
    cfg = load_config(args.config)
    sol = solve_g(
        cfg.model,
        cfg.claims,
        cfg.grid,
        update_tol=cfg.update_tol,
        residual_tol=cfg.residual_tol,
        max_iter=cfg.max_iter,
        method=cfg.method,
    )
    rep = boundary_residual_report(sol, cfg.model, cfg.claims)
    rows = zip(rep["x"], rep["g"], rep["g_prime"], rep["residual"])
    _write_rows(args.out, ["x", "g", "g_prime", "residual"], rows)
    return 0


def _surface_csv_rows(surface: ValueSurface, values):
    nodes = surface.grid.nodes
    for j, x in enumerate(nodes):
        yield [x] + [values[i, j] for i in range(values.shape[0])]


def _rate_header(surface: ValueSurface) -> list:
    return ["x"] + [f"c={float(r)!r}" for r in surface.rates.tolist()]


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    surface, _ = load_or_solve(cfg, force=args.force)
    _write_rows(
        args.out, _rate_header(surface), _surface_csv_rows(surface, surface.v)
    )
    return 0


def cmd_boundary_curve(args) -> int:
    cfg = load_config(args.config)
    surface, _ = load_or_solve(cfg, force=args.force)
    curve = extract_boundary(surface)
    rows = zip(
        curve.rates.tolist(),
        curve.x_star.tolist(),
        curve.gradient_at_zero.tolist(),
        curve.up_closure_violations.tolist(),
    )
    _write_rows(
        args.out,
        ["rate", "x_star", "gradient_at_zero", "up_closure_violations"],
        rows,
    )
    return 0


def cmd_rate_map(args) -> int:
    cfg = load_config(args.config)
    surface, _ = load_or_solve(cfg, force=args.force)
    rm = build_rate_map(surface)
    _write_rows(
        args.out, _rate_header(surface), _surface_csv_rows(surface, rm.values)
    )
    return 0


def _parse_strategy(text: str):
    if text in ("boundary", "ratchet"):
        return text, None
    if text.startswith("constant:"):
        try:
            return "constant", float(text.split(":", 1)[1])
        except ValueError:
            raise ValidationError(
                f"constant strategy needs a numeric rate, got {text!r}"
            ) from None
    raise ValidationError(
        f"unknown strategy {text!r}; expected boundary, ratchet or constant:<rate>"
    )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    kind, rate = _parse_strategy(args.strategy)
    n_paths = args.paths if args.paths is not None else cfg.paths
    seed = args.seed if args.seed is not None else cfg.seed
    horizon = args.horizon if args.horizon is not None else cfg.horizon
    x0 = args.x0
    c0 = args.c0 if args.c0 is not None else cfg.model.c_floor
    m, d = cfg.model, cfg.claims

    if kind == "boundary":
        est, payoffs = sim.estimate_boundary_payoff(
            m, d, x0, n_paths, seed, horizon=horizon, return_payoffs=True
        )
    elif kind == "constant":
        est, payoffs = sim.estimate_constant_payoff(
            m, d, rate, x0, n_paths, seed, horizon=horizon, return_payoffs=True
        )
    else:
        surface, d = load_or_solve(cfg, force=args.force)
        rm = build_rate_map(surface)
        est, payoffs = sim.estimate_ratchet_payoff(
            m, d, rm, x0, c0, n_paths, seed, horizon=horizon, return_payoffs=True
        )

    doc = {
        "strategy": args.strategy,
        "x0": x0,
        "c0": c0,
        "seed": seed,
        "mean": est.mean,
        "std_error": est.std_error,
        "n_paths": est.n_paths,
        "horizon": est.horizon,
        "tail_bound": est.tail_bound,
    }
    _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True))
    if args.per_path:
        _write_rows(
            args.per_path,
            ["path", "payoff"],
            ((i, p) for i, p in enumerate(payoffs.tolist())),
        )
    return 0


def _calibration_budget(cfg: RunConfig) -> float:
    """eps_disc at the config resolution from a half-resolution pair.

    The pair (n_x/2, n/2) -> (n_x, n) reuses the config-size solve as its
    fine member; kappa then prices the config step dx + dc.  Falls back to
    refining upward when the grid floor blocks halving.
    """
    g, lad = cfg.grid, cfg.ladder
    if g.n_x >= 128 and lad.n >= 2:
        coarse_grid = Grid(L=g.L, n_x=g.n_x // 2)
        coarse_ladder = RateLadder(c_bar=lad.c_bar, c_floor=lad.c_floor, n=lad.n // 2)
    else:
        coarse_grid, coarse_ladder = g, lad
    kappa, _ = calibrate_eps_disc(
        cfg.model, cfg.claims, coarse_grid, coarse_ladder,
        update_tol=cfg.update_tol, method=cfg.method,
    )
    return kappa * (g.dx + lad.dc)


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    surface, d = load_or_solve(cfg, force=args.force)
    cert = run_invariant_suite(surface, d)
    if not args.skip_mc:
        eps = args.eps_disc if args.eps_disc is not None else _calibration_budget(cfg)
        m = cfg.model
        points = [
            (0.0, m.c_floor),
            (0.1 * cfg.grid.L, 0.5 * (m.c_floor + m.c_bar)),
        ]
        mc = mc_cross_check(
            surface, d, points, cfg.paths, cfg.seed, eps,
            horizon=cfg.horizon,
        )
        cert = Certificate.merged(cert, mc)
    _write_text(args.out, cert.to_json())
    return 0 if cert.passed else 1


_SWEEP_SECTIONS = ("model", "claims", "grid", "ladder", "solver", "simulate")


def cmd_sweep(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise ParseError(f"cannot read config {args.config}: {e}") from None
    except yaml.YAMLError as e:
        raise ParseError(f"cannot parse config {args.config}: {e}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"config {args.config} must be a YAML mapping")

    sec, _, key = args.param.partition(".")
    if sec not in _SWEEP_SECTIONS or not key:
        raise ValidationError(
            f"sweep parameter must be section.key with section in "
            f"{_SWEEP_SECTIONS}, got {args.param!r}"
        )
    try:
        values = [float(tok) for tok in args.values.split(",") if tok.strip()]
    except ValueError:
        raise ValidationError(
            f"sweep values must be a comma-separated number list, got {args.values!r}"
        ) from None
    if not values:
        raise ValidationError("sweep needs at least one value")

    rows = []
    for val in values:
        trial = copy.deepcopy(doc)
        trial.setdefault(sec, {})
        if key in ("n_x", "n", "max_iter", "paths", "seed") and float(val).is_integer():
            trial[sec][key] = int(val)
        else:
            trial[sec][key] = val
        cfg = config_from_mapping(trial)
        surface, _ = load_or_solve(cfg)
        curve = extract_boundary(surface)
        for r, xs, gz in zip(
            curve.rates.tolist(), curve.x_star.tolist(), curve.gradient_at_zero.tolist()
        ):
            rows.append([val, r, xs, gz])
        print(f"sweep {args.param}={val!r}: done", file=sys.stderr)

    _write_rows(args.out, [args.param, "rate", "x_star", "gradient_at_zero"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="divratchet",
        description=(
            "Solver and verification toolkit for optimal dividend ratcheting "
            "with capital injections"
        ),
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, force=True):
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        if force:
            sp.add_argument(
                "--force", action="store_true",
                help="re-solve even when a cached surface matches",
            )

    sp = sub.add_parser("boundary", help="cap-rate value g as CSV (x,g,g_prime,residual)")
    common(sp, force=False)
    sp.set_defaults(func=cmd_boundary)

    sp = sub.add_parser("solve", help="solve the rate ladder, cache it, emit value CSV")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("boundary-curve", help="switching threshold per rate as CSV")
    common(sp)
    sp.set_defaults(func=cmd_boundary_curve)

    sp = sub.add_parser("rate-map", help="equivalent maximum rate lattice as CSV")
    common(sp)
    sp.set_defaults(func=cmd_rate_map)

    sp = sub.add_parser("simulate", help="Monte Carlo payoff of a strategy as JSON")
    common(sp)
    sp.add_argument(
        "--strategy", required=True,
        help="boundary | ratchet | constant:<rate>",
    )
    sp.add_argument("--x0", type=float, required=True, help="initial surplus")
    sp.add_argument("--c0", type=float, default=None, help="initial rate (ratchet)")
    sp.add_argument("--paths", type=int, default=None, help="path count override")
    sp.add_argument("--seed", type=int, default=None, help="seed override")
    sp.add_argument("--horizon", type=float, default=None, help="horizon override")
    sp.add_argument("--per-path", default=None, help="also write per-path payoff CSV here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="invariant suite + MC cross-check certificate")
    common(sp)
    sp.add_argument(
        "--eps-disc", type=float, default=None,
        help="discretization budget override (skips refinement calibration)",
    )
    sp.add_argument(
        "--skip-mc", action="store_true",
        help="structural checks only, no Monte Carlo",
    )
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="boundary curves across one parameter axis")
    common(sp, force=False)
    sp.add_argument("--param", required=True, help="section.key, e.g. model.ell")
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.set_defaults(func=cmd_sweep)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivRatchetError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
