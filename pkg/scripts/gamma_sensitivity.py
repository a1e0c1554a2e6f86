#!/usr/bin/env python3
"""Regularizer-weight sensitivity: sweep gamma over the search grid.

Runs the classification task over gamma in {1e-2, 1e-1, 1, 10} (plus a
gamma=0 control) with five seeds each, matching the hyperparameter study
protocol.  Use --task regression for the soft-label variant.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from bottletree.datasets import gen_blobs, gen_regression, save_csv  # noqa: E402
from bottletree.sweep import ExperimentSpec, run_sweep  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="runs/gamma_sensitivity")
    ap.add_argument("--task", choices=["classification", "regression"],
                    default="classification")
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--data-seed", type=int, default=42)
    ap.add_argument("--gammas", type=float, nargs="+",
                    default=[0.0, 1e-2, 1e-1, 1.0, 10.0])
    ap.add_argument("--betas", type=float, nargs="+", default=[0.01])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    data_path = os.path.join(args.out_dir, f"{args.task}.csv")
    if not os.path.exists(data_path):
        if args.task == "classification":
            ds = gen_blobs(4, args.n, args.dim, 0.45, args.data_seed)
        else:
            ds = gen_regression(args.n, args.dim, 0.5, 0.0, 5.0, args.data_seed)
        save_csv(ds, data_path)

    spec = ExperimentSpec(
        data_path=data_path, task_kind=args.task,
        betas=tuple(args.betas), gammas=tuple(args.gammas),
        seeds=tuple(args.seeds), out_dir=args.out_dir, jobs=args.jobs,
        bins=5, lo=0.0 if args.task == "regression" else None,
        hi=5.0 if args.task == "regression" else None)
    summary = run_sweep(spec)
    print(f"{summary['succeeded']}/{summary['cells']} runs succeeded; "
          f"see {os.path.join(args.out_dir, 'aggregate.csv')}")
    return 0 if summary["failed"] == 0 else 2


if __name__ == "__main__":
    sys.exit(main())
