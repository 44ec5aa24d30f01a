"""Sudden change of the unknown system at instant 501: tracking behaviour.

    python3 scripts/run_fig2.py --runs 50 --out results/fig2
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
    p.add_argument("--out", default="results/fig2")
    args = p.parse_args()

    config = dataclasses.replace(PRESETS["fig2-time-varying"], runs=args.runs, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    series = run_experiment(config, workers=args.workers, variants=("subgrad-ball", "nlms"))
    for name, s in series.items():
        emit_csv(s, out_dir / f"{name}.csv")
        db = s.msd_db
        plateau = float(np.mean(db[450:501]))
        print(
            f"{name:>13}: plateau {plateau:6.1f} dB, MSD(510) {db[510]:6.1f}, "
            f"MSD(520) {db[520]:6.1f}, MSD(1000) {db[1000]:6.1f}"
        )


if __name__ == "__main__":
    main()
