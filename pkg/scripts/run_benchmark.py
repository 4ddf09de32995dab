#!/usr/bin/env python3
"""Train and evaluate on the synthetic benchmark for several model seeds.

    python scripts/run_benchmark.py --seeds 0 1 2 --out results/default.json
    python scripts/run_benchmark.py --kinds none          # unpredictable control
"""

import argparse
import json
import logging
from pathlib import Path

from igcl.benchmark import BenchmarkSetup, run_seeds, summarize
from igcl.config import TrainConfig
from igcl.synth import KINDS


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--kinds", nargs="+", choices=KINDS, default=list(KINDS[:-1]))
    p.add_argument("--magnitude", type=float, default=BenchmarkSetup.magnitude)
    p.add_argument("--bank-size", type=int, default=TrainConfig.bank_size)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--generator-signal", default=TrainConfig.generator_signal)
    p.add_argument("--out", type=Path)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    setup = BenchmarkSetup(kinds=tuple(args.kinds), magnitude=args.magnitude, data_seed=args.data_seed)
    cfg = TrainConfig(bank_size=args.bank_size, epochs=args.epochs, generator_signal=args.generator_signal)
    summary = summarize(run_seeds(setup, args.seeds, cfg))
    summary["setup"] = {k: list(v) if isinstance(v, tuple) else v for k, v in vars(setup).items()}
    summary["config"] = cfg.to_dict()

    for r in summary["runs"]:
        print(f"seed {r['seed']}: auc={r['roc_auc']:.4f} best_f1={r['best_f1']:.4f} "
              f"random={r['random_best_f1']:.4f} ({r['train_seconds']:.0f}s train)")
    print(f"median auc={summary['median_roc_auc']:.4f}  median f1 margin={summary['median_f1_margin']:.4f}  "
          f"total {summary['seconds']:.0f}s")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
