"""Command-line entry point: ``levytree <kind> [--config PATH] [--seed N] ...``."""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .config import KINDS, ExperimentConfig, load_config
from .errors import CalibrationError, ConfigError, DomainError, UnsupportedError
from .experiments import run_experiment

HELP = {
    "gen": "sample and rescale conditioned Galton-Watson trees",
    "mark": "mark trees, decompose into pruning classes, write the class table",
    "cuts": "count edge and vertex cuts on GW trees or a fixed shape",
    "theorem31": "compare (Theta, regraft atoms) with (H, spine atoms)",
    "corollary32": "small-class counts against Theta per replica",
    "rayleigh": "heights and Theta against the Rayleigh law",
    "zmoments": "moments of vertex cuts over length against the closed form",
    "calibrate": "estimate the edge scale from pilot trees",
}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levytree", description="Pruning and regrafting experiments on random trees.")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="KIND")
    for kind in KINDS:
        p = sub.add_parser(kind, help=HELP[kind], description=HELP[kind])
        p.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
        p.add_argument("--seed", type=_u64, metavar="U64", help="master seed (overrides the config)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
        p.add_argument("--replicas", type=int, metavar="N", help="number of replicas (overrides the config)")
        p.add_argument("--threads", type=_positive, metavar="K",
                       help="worker processes; falls back to LEVYTREE_THREADS, then 1")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        flat = load_config(args.config) if args.config else {}
        overrides = {"seed": args.seed, "out": args.out, "replicas": args.replicas}
        flat.update({k: v for k, v in overrides.items() if v is not None})
        cfg = ExperimentConfig.from_flat(flat, kind=args.kind)
        result = run_experiment(cfg, threads=args.threads)
    except (ConfigError, CalibrationError, DomainError, UnsupportedError) as exc:
        print(f"levytree: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"levytree: error: {exc}", file=sys.stderr)
        return 3
    rep = result.report
    print(json.dumps({"out": str(result.out), "files": result.files, "pass": rep["pass"]}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
