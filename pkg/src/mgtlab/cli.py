"""Command line entry point: ``mgtlab <subcommand> [--config PATH] [--out DIR]
[--seed N] [--threads K]``.  Exit status is 0 exactly when every check passes."""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import ConfigError
from .expcli import KINDS, load_spec, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgtlab", description=__doc__.splitlines()[0])
    parser.add_argument("kind", choices=KINDS, help="experiment to run")
    parser.add_argument("--config", help="YAML or JSON experiment config")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="seed for randomized sweeps (unsigned 64-bit)")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("--fast", action="store_true", help="accept: reduced-size smoke run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.config)
        overrides = {"kind": args.kind}
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            overrides["seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
            overrides["threads"] = args.threads
        spec = dataclasses.replace(spec, **overrides)
        if args.fast:
            spec.blocks["accept"]["fast"] = True
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out or spec.output["dir"]
    report = run(spec, out)
    for c in report.checks:
        tag = "PASS" if c.passed else "FAIL"
        crit = f"[{c.criterion}] " if c.criterion else ""
        print(f"{tag} {crit}{c.name}: measured={c.measured:.6g} expected={c.expected:.6g} {c.note}".rstrip())
    print(f"{sum(c.passed for c in report.checks)}/{len(report.checks)} checks passed; "
          f"artifacts in {out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
