"""Time-invariant sparse system: learning curves of both ball operators.

    python3 scripts/run_fig1.py --runs 50 --out results/fig1
"""

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from apsm.harness import PRESETS, emit_csv, run_experiment


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results/fig1")
    args = p.parse_args()

    config = dataclasses.replace(PRESETS["fig1-time-invariant"], runs=args.runs, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    variants = ("subgrad-ball", "exact-ball", "nlms")
    series = run_experiment(config, workers=args.workers, variants=variants)
    for name, s in series.items():
        emit_csv(s, out_dir / f"{name}.csv")
        tail = float(np.mean(s.msd_db[400:451]))
        print(f"{name:>13}: MSD(0) {s.msd_db[0]:6.1f} dB, mean over [400,450] {tail:6.1f} dB")


if __name__ == "__main__":
    main()
