"""Command line entry point: Monte-Carlo learning curves as CSV."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .harness import PRESETS, VARIANTS, dump_config, emit_csv, load_config, run_experiment

log = logging.getLogger("apsm")


def _output_paths(out: str, variants) -> dict[str, Path]:
    out = Path(out)
    if len(variants) == 1:
        return {variants[0]: out}
    return {v: out.with_name(f"{out.stem}_{v}{out.suffix or '.csv'}") for v in variants}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="apsm",
        description="Run an online sparse system identification experiment and write MSD curves.",
    )
    p.add_argument("--preset", choices=sorted(PRESETS), help="base scenario (default fig1-time-invariant)")
    p.add_argument("--config", help="key = value file; overrides the preset")
    p.add_argument(
        "--variant",
        help=f"comma-separated subset of {','.join(VARIANTS)}, or 'all'",
    )
    p.add_argument("--runs", type=int, help="number of independent runs")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--steps", type=int, dest="num_samples", help="samples per run")
    p.add_argument("--out", default="msd.csv", help="CSV path; one file per variant when several")
    p.add_argument("--workers", type=int, default=1, help="process pool size")
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    variant = ",".join(VARIANTS) if args.variant == "all" else args.variant
    try:
        config = load_config(
            args.config,
            preset=args.preset,
            variant=variant,
            runs=args.runs,
            seed=args.seed,
            num_samples=args.num_samples,
        )
        if args.print_config:
            sys.stdout.write(dump_config(config))
            return 0
        if args.workers < 1:
            raise ValueError("--workers must be at least 1")
        t0 = time.perf_counter()
        series = run_experiment(config, workers=args.workers)
        for v, path in _output_paths(args.out, config.variants).items():
            emit_csv(series[v], path)
            log.info("%s: wrote %s", v, path)
        log.info("done in %.1f s", time.perf_counter() - t0)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"apsm: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
