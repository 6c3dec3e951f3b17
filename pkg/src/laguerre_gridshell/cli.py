"""Command line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .laguerre import map_from_recipe
from .pipeline import PipelineError, load_config, run_pipeline, surface_setup
from .selfcheck import run_checks

logger = logging.getLogger(__name__)

COMMANDS = {
    "surface": ("surface", "sample the cyclide; write OBJ and field CSV"),
    "transform": ("transform", "apply the generator list; write the transformed field"),
    "target": ("target", "build the gridshell; write model JSON with targets and loads"),
    "optimize": ("optimize", "optimize group radii; write trace and result"),
    "adjust": ("adjust", "stress-ratio adjustment of the pre-transformation optimum"),
    "report": ("report", "tables and geometry checks"),
    "pipeline": ("report", "run every stage"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="laguerre-gridshell", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config (missing keys take defaults)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed-check", action="store_true", help="run the invariant suite first")
    return parser


def seed_check(cfg) -> bool:
    params, center = surface_setup(cfg)
    recipe = cfg.get("transformation") or []
    lmap = map_from_recipe(recipe) if recipe else None
    ok = True
    for name, passed, detail in run_checks(params, center, float(cfg["load"]["Z"]), lmap,
                                           int(cfg["grid"]["n_xi"]), int(cfg["grid"]["n_eta"])):
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return ok


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 1
    if args.seed_check:
        try:
            if not seed_check(cfg):
                print("error [seed-check]: invariant suite failed", file=sys.stderr)
                return 3
        except Exception as exc:  # noqa: BLE001 - report any failure with its stage
            print(f"error [seed-check]: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 3
    stage = COMMANDS[args.command][0]
    try:
        report = run_pipeline(cfg, args.out, until=stage)
    except PipelineError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    print(f"{args.command}: wrote {len(report.files)} files to {args.out or cfg.get('outputs', 'out')}")
    for name, rows in report.tables.items():
        for label, r in rows.items():
            print(f"  {name:<7} {label:<18} max {r['max_dev']:9.1f}  mean {r['mean_dev']:8.1f}  "
                  f"shear/load {r['mean_shear_load']:.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
