#!/usr/bin/env python3
"""ROC-AUC with and without the memory bank (K = 0 vs K = 16) over model seeds."""

import argparse
import json
import logging
from pathlib import Path

import numpy as np

from igcl.benchmark import BenchmarkSetup, run_seeds
from igcl.config import TrainConfig


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--sizes", type=int, nargs="+", default=[0, 16])
    p.add_argument("--out", type=Path)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    setup = BenchmarkSetup()
    table = {}
    for k in args.sizes:
        table[k] = [r.roc_auc for r in run_seeds(setup, args.seeds, TrainConfig(bank_size=k))]
        print(f"K={k:3d}  auc " + "  ".join(f"{a:.4f}" for a in table[k]) + f"  median {np.median(table[k]):.4f}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps({str(k): v for k, v in table.items()}, indent=2) + "\n")


if __name__ == "__main__":
    main()
