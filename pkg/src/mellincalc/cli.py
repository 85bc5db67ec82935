"""Command-line entry point: ``mellincalc <suite> --config FILE ...``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, RunConfig, load_config, validate
from .suites import SUITES, run_suite, write_outputs

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mellincalc",
        description="Mellin-transform multiplier calculus: run verification suites.")
    ap.add_argument("suite", choices=SUITES + ("all",))
    ap.add_argument("--config", help="key = value or JSON configuration file")
    ap.add_argument("--alpha", type=int, help="smoothness order (overrides the config)")
    ap.add_argument("--multiplier", help="family:params, e.g. br_psi:4")
    ap.add_argument("--model", help="cycle:n or diagonal:file.json")
    ap.add_argument("--seed", type=int, help="64-bit seed for random ensembles")
    ap.add_argument("--out", help="output directory (default from the config, else ./out)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args) -> RunConfig:
    overrides = {"alpha": args.alpha, "multiplier": args.multiplier, "model": args.model,
                 "seed": args.seed, "output_dir": args.out}
    if args.config:
        return load_config(args.config).with_overrides(**overrides)
    return validate({k: v for k, v in overrides.items() if v is not None})


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"mellincalc: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    reports = run_suite(cfg, args.suite)
    paths = write_outputs(reports, cfg, cfg.output_dir)
    for r in reports:
        print(r.summary_line())
    n_fail = sum(not r.passed for r in reports)
    print(f"{len(reports) - n_fail}/{len(reports)} checks passed; reports in {paths[0]}")
    return EXIT_OK if n_fail == 0 else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
