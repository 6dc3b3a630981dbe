"""Command-line driver: ``pathmed {fit,tune,effects,simulate}``.

Every flag may also come from a TOML file given with ``--config``; keys are
flag names with dashes or underscores, either at the top level or inside a
table named after the command. Flags on the command line win.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .admm import FitOptions, fit
from .effects import pathway_effects
from .errors import PathmedError
from .io import (effects_summary, emit_results, load_coefficients, load_dataset, write_grid_table,
                 write_manifest)
from .model import PenaltyConfig, mask_label, parse_mask, standardize
from .simulation import NoiseScales, SimConfig, run_experiment
from .tuning import PRESETS, TuningPlan, bic, grid_search

log = logging.getLogger("pathmed")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _add_solver_flags(p):
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--rel-tol", type=float, default=1e-6)


def _add_penalty_flags(p, kappa_help):
    p.add_argument("--kappa", default=None, help=kappa_help)
    p.add_argument("--ratio", type=float, default=None, help="mu / kappa")
    p.add_argument("--mask", default=None, help="penalty terms, e.g. P1P2P3 or P2,P3")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="named mask and ratio combination")
    p.add_argument("--nu", type=float, default=2.0)


def _add_data_flags(p):
    for name in ("x", "m1", "m2", "y"):
        p.add_argument(f"--{name}", default=None, help=f"CSV file for {name.upper()}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathmed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="TOML file with flag values")
    common.add_argument("--out", default="pathmed-out")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")

    p = sub.add_parser("fit", parents=[common], help="fit one penalty configuration")
    _add_data_flags(p)
    _add_penalty_flags(p, "shared kappa for all four kappa weights")
    _add_solver_flags(p)

    p = sub.add_parser("tune", parents=[common], help="BIC grid search over kappa")
    _add_data_flags(p)
    _add_penalty_flags(p, "comma-separated kappa grid (default: automatic)")
    _add_solver_flags(p)
    p.add_argument("--n-grid", type=int, default=30)

    p = sub.add_parser("effects", parents=[common], help="pathway effects from saved coefficients")
    p.add_argument("--coef", default=None, help="directory written by fit or tune")
    p.add_argument("--x-value", dest="x_value", type=float, default=1.0)
    p.add_argument("--x-star", type=float, default=0.0)

    p = sub.add_parser("simulate", parents=[common], help="replicated Monte-Carlo experiment")
    _add_penalty_flags(p, "comma-separated kappa grid (default: automatic per replication)")
    _add_solver_flags(p)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--p1", type=int, default=20)
    p.add_argument("--p2", type=int, default=30)
    p.add_argument("--sparsity", type=float, default=0.1)
    p.add_argument("--target-ie", type=float, default=8.0)
    p.add_argument("--noise", default="1,1,1", help="error sds of M1, M2 and Y")
    p.add_argument("--exposure", choices=("normal", "bernoulli"), default="normal")
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--n-grid", type=int, default=30)
    return parser


def _config_defaults(path, command) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise PathmedError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise PathmedError(f"invalid TOML in {path}: {exc}") from exc
    flat = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    flat.update(raw.get(command, {}))
    return {k.replace("-", "_"): v for k, v in flat.items()}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        defaults = _config_defaults(args.config, args.command)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(defaults) - known)
        if unknown:
            parser.error(f"unknown keys in {args.config}: {', '.join(unknown)}")
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _plan_parts(args):
    mask, ratio = ("P1P2P3", 0.1)
    if args.preset:
        mask, ratio = PRESETS[args.preset]
    if args.mask is not None:
        mask = args.mask
    if args.ratio is not None:
        ratio = args.ratio
    return parse_mask(mask), float(ratio), (args.nu, args.nu)


def _opts(args) -> FitOptions:
    return FitOptions(rho=args.rho, max_iters=args.max_iters, rel_tol=args.rel_tol)


def _load(args):
    missing = [n for n in ("x", "m1", "m2", "y") if getattr(args, n) is None]
    if missing:
        raise PathmedError("missing input files: " + ", ".join(f"--{m}" for m in missing))
    paths = {n: getattr(args, n) for n in ("x", "m1", "m2", "y")}
    return paths, load_dataset(*paths.values())


def cmd_fit(args):
    paths, raw = _load(args)
    data = standardize(raw)
    mask, ratio, nu = _plan_parts(args)
    if args.kappa is None:
        raise PathmedError("fit needs --kappa")
    kappa = _floats(args.kappa)
    if len(kappa) != 1:
        raise PathmedError("fit takes a single --kappa value; use tune for a grid")
    cfg = PenaltyConfig.shared(kappa[0], ratio, mask, nu)
    opts = _opts(args)
    res = fit(data, cfg, opts)
    _emit_fit(args.out, res, data, extra={"kappa": kappa[0], "bic": bic(res, data)})
    write_manifest(args.out, "fit", paths, {"penalty": cfg.as_dict(), "options": opts.as_dict()}, args.seed)


def _emit_fit(out, res, data, extra):
    """Coefficients on the original scale at ``out``, standardized copies underneath."""
    orig = res.coef.to_original_scale(data.scaling)
    eff = pathway_effects(orig)
    extra = dict(extra, scale="original",
                 effects=effects_summary(eff, list(data.m1_names), list(data.m2_names)))
    emit_results(replace(res, coef=orig), out, m1_names=data.m1_names, m2_names=data.m2_names, extra=extra)
    emit_results(res, Path(out) / "standardized", m1_names=data.m1_names, m2_names=data.m2_names,
                 extra={**{k: v for k, v in extra.items() if k != "effects"}, "scale": "standardized"})


def cmd_tune(args):
    paths, raw = _load(args)
    data = standardize(raw)
    mask, ratio, nu = _plan_parts(args)
    grid = None if args.kappa is None else tuple(_floats(args.kappa))
    plan = TuningPlan(kappa_grid=grid, ratio=ratio, mask=mask, nu=nu, rho=args.rho, n_grid=args.n_grid)
    opts = _opts(args)
    best, records = grid_search(data, plan, opts)
    chosen = next(r for r in records if r.result is best)
    failed = sum(not r.ok for r in records)
    _emit_fit(args.out, best, data, extra={"kappa": chosen.kappa, "bic": chosen.bic,
                                          "grid_failures": failed})
    write_grid_table(records, args.out)
    write_manifest(args.out, "tune", paths, {"plan": plan.as_dict(), "options": opts.as_dict()}, args.seed)


def cmd_effects(args):
    if args.coef is None:
        raise PathmedError("effects needs --coef DIR")
    coef, m1_names, m2_names = load_coefficients(args.coef)
    eff = pathway_effects(coef, args.x_value, args.x_star)
    emit_results(eff, args.out, m1_names=m1_names, m2_names=m2_names,
                 extra={"x": args.x_value, "x_star": args.x_star})
    write_manifest(args.out, "effects", {"coef": args.coef},
                   {"x": args.x_value, "x_star": args.x_star}, args.seed)


def cmd_simulate(args):
    mask, ratio, nu = _plan_parts(args)
    noise = _floats(args.noise)
    if len(noise) != 3:
        raise PathmedError("--noise takes three comma-separated sds")
    config = SimConfig(n=args.n, p1=args.p1, p2=args.p2, sparsity=args.sparsity,
                       target_total_ie=args.target_ie, noise=NoiseScales(*noise), seed=args.seed,
                       replications=args.replications, exposure=args.exposure)
    grid = None if args.kappa is None else tuple(_floats(args.kappa))
    plan = TuningPlan(kappa_grid=grid, ratio=ratio, mask=mask, nu=nu, rho=args.rho, n_grid=args.n_grid)
    opts = _opts(args)
    workers = args.threads if args.threads is not None else (os.cpu_count() or 1)
    report = run_experiment(config, plan, opts, workers=workers)
    emit_results(report, args.out, extra={"mask": mask_label(mask)})
    write_manifest(args.out, "simulate", {}, {"sim": config.as_dict(), "plan": plan.as_dict(),
                                              "options": opts.as_dict(), "threads": workers}, args.seed)
    if report.skips:
        log.warning("%d of %d replications were skipped", report.skips, len(report.records))


COMMANDS = {"fit": cmd_fit, "tune": cmd_tune, "effects": cmd_effects, "simulate": cmd_simulate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except PathmedError as exc:
        print(f"pathmed: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (PathmedError, OSError, ValueError) as exc:
        print(f"pathmed: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
