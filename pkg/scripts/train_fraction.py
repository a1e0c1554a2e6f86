#!/usr/bin/env python3
"""Limited-training-data protocol: keep {0.9, 0.7, 0.5, 0.3} of the train split.

Same harness as the noise sweep; dev/test splits stay untouched so the
comparison isolates the training-set size.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from bottletree.datasets import gen_blobs, save_csv  # noqa: E402
from bottletree.sweep import ExperimentSpec, run_sweep  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="runs/train_fraction")
    ap.add_argument("--classes", type=int, default=4)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--spread", type=float, default=0.45)
    ap.add_argument("--data-seed", type=int, default=42)
    ap.add_argument("--fractions", type=float, nargs="+",
                    default=[0.9, 0.7, 0.5, 0.3])
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.0, 1.0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    data_path = os.path.join(args.out_dir, "blobs.csv")
    if not os.path.exists(data_path):
        save_csv(gen_blobs(args.classes, args.n, args.dim, args.spread,
                           args.data_seed), data_path)

    spec = ExperimentSpec(
        data_path=data_path, task_kind="classification",
        betas=(0.01,), gammas=tuple(args.gammas), seeds=tuple(args.seeds),
        fractions=tuple(args.fractions), out_dir=args.out_dir, jobs=args.jobs)
    summary = run_sweep(spec)
    print(f"{summary['succeeded']}/{summary['cells']} runs succeeded; "
          f"see {os.path.join(args.out_dir, 'aggregate.csv')}")
    return 0 if summary["failed"] == 0 else 2


if __name__ == "__main__":
    sys.exit(main())
