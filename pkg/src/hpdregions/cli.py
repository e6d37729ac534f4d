"""Command-line entry point.

    hpdregions coverage --config cfg.toml --out runs/
    hpdregions simulate --config cfg.toml --out demo/
    hpdregions mvee points.txt
    hpdregions quantile --prob 0.95 --dof 3
    hpdregions version

Exit status: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .export import export_records, write_demo
from .geometry import GeometryError, chi2_quantile, ellipsoid_volume, mvee
from .harness import ConfigError, ExperimentConfig, load_config, run_experiment, simulate_demo

log = logging.getLogger("hpdregions")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="TOML experiment configuration")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--particles", type=int)
    p.add_argument("--measurements", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--kinds", help="comma-separated subset of pce,mvee,clustered")
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hpdregions", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("coverage", help="run a full coverage experiment")
    _add_experiment_flags(p)

    p = sub.add_parser("simulate", help="one trial with particle/region snapshots")
    _add_experiment_flags(p)
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("mvee", help="minimum-volume enclosing ellipsoid of a point file")
    p.add_argument("points", type=Path, help="whitespace-delimited file, one point per row")
    p.add_argument("--tolerance", type=float, default=1e-6)

    p = sub.add_parser("quantile", help="chi-square quantile")
    p.add_argument("--prob", type=float, required=True)
    p.add_argument("--dof", type=int, required=True)

    sub.add_parser("version", help="print the package version")
    return parser


def _experiment_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {
        k: getattr(args, k)
        for k in ("seed", "trials", "particles", "measurements", "alpha")
        if getattr(args, k) is not None
    }
    if args.kinds:
        overrides["kinds"] = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    if "measurements" in overrides and cfg.checkpoints and max(cfg.checkpoints) > overrides["measurements"]:
        overrides["checkpoints"] = None
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _cmd_coverage(args) -> int:
    cfg = _experiment_config(args)
    summary, records = run_experiment(cfg, progress=not args.quiet)
    paths = export_records(records, summary, args.out)
    if not args.quiet:
        last = cfg.checkpoints[-1]
        for e in summary.coverage:
            if e.checkpoint == last:
                print(f"N={last:<6d} {e.kind:<16s} coverage {e.coverage:.3f} [{e.beta_lo:.3f}, {e.beta_hi:.3f}]")
        print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _experiment_config(args)
    paths = write_demo(simulate_demo(cfg, args.trial), args.out)
    if not args.quiet:
        print(f"wrote {len(paths)} snapshot(s) to {args.out}")
    return 0


def _cmd_mvee(args) -> int:
    if not args.points.is_file():
        raise ConfigError(f"point file not found: {args.points}")
    try:
        pts = np.loadtxt(args.points, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{args.points}: {exc}") from None
    e = mvee(pts, args.tolerance)
    print(json.dumps({"center": e.center.tolist(), "shape": e.shape.tolist(), "volume": ellipsoid_volume(e)}))
    return 0


def _cmd_quantile(args) -> int:
    try:
        q = chi2_quantile(args.prob, args.dof)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"{q:.6g}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"hpdregions: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    handlers = {
        "coverage": _cmd_coverage,
        "simulate": _cmd_simulate,
        "mvee": _cmd_mvee,
        "quantile": _cmd_quantile,
    }
    try:
        if args.command == "version":
            print(__version__)
            return 0
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"hpdregions: configuration error: {exc}", file=sys.stderr)
        return 1
    except GeometryError as exc:
        print(f"hpdregions: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"hpdregions: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
