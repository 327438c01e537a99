"""Command line entry point: ``vvlab {run,sweep,riemann,geometry,divcurl} CONFIG``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, parse_config
from .harness import EXECUTORS, OUTPUT_ENV, emit_report

log = logging.getLogger("vvlab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vvlab", description="Vanishing-viscosity experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "single-viscosity run with monitors",
        "sweep": "viscosity sweep with gap, diracness and uniform-bound analyses",
        "riemann": "exact Riemann solution to CSV",
        "geometry": "Gauss-Codazzi residual grids and fluid-formalism checks",
        "divcurl": "div-curl weak continuity experiment",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, default=None,
                       help=f"output root (default: config 'output', then ${OUTPUT_ENV}, then ./vvlab_out)")
        p.add_argument("--quiet", action="store_true", help="suppress the report")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kind = args.command
    try:
        cfg = parse_config(args.config.read_text(), kind)
    except (OSError, ConfigError) as exc:
        print(f"vvlab: {args.config}: {exc}", file=sys.stderr)
        return 1
    if kind == "sweep" and cfg.sweep is None:
        print("vvlab: sweep needs a 'sweep' list of epsilons", file=sys.stderr)
        return 1
    try:
        manifest = EXECUTORS[kind](cfg, args.out)
    except OSError as exc:
        print(f"vvlab: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        print(emit_report(manifest), end="")
        print(f"manifest: {manifest.path}")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
