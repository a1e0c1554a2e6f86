"""Command-line harness: dataset generation, training, sweeps, verification.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 verification
failure.  Every command is deterministic given its flags; the default output
directory can be set with the BOTTLETREE_OUT environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .coder import save_checkpoint
from .datasets import gen_blobs, gen_regression, load_csv, save_csv
from .softbins import make_bins
from .sweep import ExperimentSpec, run_sweep
from .training import (ClassificationTask, RegressionTask, TrainConfig,
                       TrainingDiverged, evaluate, train, write_history_csv,
                       write_report_json)
from .verify import ALL_CHECKS, run_checks

OUT_ENV = "BOTTLETREE_OUT"


class _UsageExit(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageExit(1)


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "runs")


def _hidden(arg: str) -> tuple[int, ...]:
    return tuple(int(x) for x in arg.split(",") if x)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bottletree",
                     description="Probabilistic coding with an encoding-tree "
                                 "entropy regularizer")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    gen_sub = gen.add_subparsers(dest="generator", required=True,
                                 parser_class=_Parser)
    blobs = gen_sub.add_parser("blobs", help="Gaussian blob classification set")
    blobs.add_argument("--classes", type=int, required=True)
    blobs.add_argument("--n", type=int, required=True)
    blobs.add_argument("--dim", type=int, required=True)
    blobs.add_argument("--spread", type=float, default=1.0)
    blobs.add_argument("--seed", type=int, required=True)
    blobs.add_argument("--out", default=None, help="output CSV path")
    reg = gen_sub.add_parser("regression", help="noisy nonlinear regression set")
    reg.add_argument("--n", type=int, required=True)
    reg.add_argument("--dim", type=int, required=True)
    reg.add_argument("--noise-std", type=float, default=0.25)
    reg.add_argument("--lo", type=float, required=True)
    reg.add_argument("--hi", type=float, required=True)
    reg.add_argument("--seed", type=int, required=True)
    reg.add_argument("--out", default=None, help="output CSV path")

    tr = sub.add_parser("train", help="train one model and report test metrics")
    _add_train_flags(tr)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out-dir", default=None)

    sw = sub.add_parser("sweep", help="grid sweep over beta/gamma/seeds/perturbations")
    _add_train_flags(sw)
    sw.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    sw.add_argument("--betas", type=float, nargs="+", default=None,
                    help="overrides --beta with a grid")
    sw.add_argument("--gammas", type=float, nargs="+", default=None,
                    help="overrides --gamma with a grid")
    sw.add_argument("--noise-rates", type=float, nargs="+", default=[])
    sw.add_argument("--fractions", type=float, nargs="+", default=[])
    sw.add_argument("--perturb-seed", type=int, default=0)
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--out-dir", default=None)

    ver = sub.add_parser("verify", help="run the oracle/invariant/gradient suite")
    ver.add_argument("--only", default=None,
                     help=f"comma-separated subset of {','.join(ALL_CHECKS)}")
    ver.add_argument("--dump", default=None, metavar="PATH",
                     help="also write a JSON debug record (A, C, per-class "
                          "cuts/volumes, loss) for one hard and one soft instance")
    return parser


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--task", choices=["classification", "regression"],
                   required=True)
    p.add_argument("--beta", type=float, default=1e-2)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--hidden", type=_hidden, default=(64,),
                   help="comma-separated hidden widths, e.g. 64,32")
    p.add_argument("--activation", choices=["relu", "sigmoid"], default="relu")
    p.add_argument("--use-mu-graph", action="store_true",
                   help="build the similarity graph from the posterior mean")
    p.add_argument("--samples", type=int, default=1,
                   help="latent samples per input per step")
    p.add_argument("--bins", type=int, default=5, help="regression bin count")
    p.add_argument("--lo", type=float, default=None,
                   help="label-range lower bound (default: from data)")
    p.add_argument("--hi", type=float, default=None,
                   help="label-range upper bound (default: from data)")
    p.add_argument("--hard-labels", action="store_true",
                   help="nearest-bin hard labels instead of softened ones")
    p.add_argument("--tau", type=float, default=1.0,
                   help="softening temperature")


def _train_kwargs(args) -> dict:
    return {"lr": args.lr, "epochs": args.epochs, "patience": args.patience,
            "batch_size": args.batch_size, "hidden": args.hidden,
            "activation": args.activation,
            "use_mu_for_graph": args.use_mu_graph,
            "samples_per_input": args.samples}


def _build_task(args, ds):
    if args.task == "classification":
        if not ds.is_classification:
            raise ValueError("dataset labels are continuous; use --task regression")
        return ClassificationTask(ds.num_classes)
    lo = args.lo if args.lo is not None else float(ds.y.min())
    hi = args.hi if args.hi is not None else float(ds.y.max())
    return RegressionTask(make_bins(lo, hi, args.bins),
                          soft_labels=not args.hard_labels,
                          temperature=args.tau)


def cmd_gen(args) -> int:
    if args.generator == "blobs":
        ds = gen_blobs(args.classes, args.n, args.dim, args.spread, args.seed)
        default_name = f"blobs_c{args.classes}_n{args.n}_d{args.dim}_s{args.seed}.csv"
    else:
        ds = gen_regression(args.n, args.dim, args.noise_std, args.lo, args.hi,
                            args.seed)
        default_name = f"regression_n{args.n}_d{args.dim}_s{args.seed}.csv"
    out = args.out or os.path.join(_default_out(), default_name)
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    save_csv(ds, out)
    print(f"wrote {ds.n} rows to {out}")
    return 0


def cmd_train(args) -> int:
    ds = load_csv(args.data)
    task = _build_task(args, ds)
    config = TrainConfig(task=task, beta=args.beta, gamma=args.gamma,
                         seed=args.seed, **_train_kwargs(args))
    out_dir = args.out_dir or _default_out()
    os.makedirs(out_dir, exist_ok=True)
    try:
        result = train(config, ds.subset("train"), ds.subset("dev"))
    except TrainingDiverged as exc:
        dump = os.path.join(out_dir, "diverged.json")
        with open(dump, "w", encoding="utf-8") as fh:
            json.dump({"step": exc.step, "breakdown": exc.breakdown}, fh,
                      sort_keys=True, indent=2)
        print(f"training diverged at step {exc.step}; dump at {dump}",
              file=sys.stderr)
        return 2
    report = evaluate(result.params, *ds.subset("test"), config)
    write_report_json(report, os.path.join(out_dir, "report.json"))
    write_history_csv(result.history, os.path.join(out_dir, "history.csv"))
    save_checkpoint(result.params, os.path.join(out_dir, "model.json"),
                    seed=config.seed)
    name = "macro_f1" if task.kind == "classification" else "spearman"
    print(f"test {name} = {report.headline:.6f} "
          f"(best dev epoch {result.best_epoch})")
    return 0


def cmd_sweep(args) -> int:
    betas = tuple(args.betas) if args.betas else (args.beta,)
    gammas = tuple(args.gammas) if args.gammas else (args.gamma,)
    spec = ExperimentSpec(
        data_path=args.data, task_kind=args.task, betas=betas, gammas=gammas,
        seeds=tuple(args.seeds), out_dir=args.out_dir or _default_out(),
        noise_rates=tuple(args.noise_rates), fractions=tuple(args.fractions),
        perturb_seed=args.perturb_seed, jobs=args.jobs, bins=args.bins,
        lo=args.lo, hi=args.hi, soft_labels=not args.hard_labels,
        temperature=args.tau, train_kwargs=_train_kwargs(args))
    summary = run_sweep(spec)
    print(f"sweep finished: {summary['succeeded']}/{summary['cells']} runs "
          f"succeeded, {summary['failed']} failed; outputs in {spec.out_dir}")
    return 0  # child failures are recorded in errors.json, never abort the sweep


def cmd_verify(args) -> int:
    only = [s for s in (args.only or "").split(",") if s] or None
    results = run_checks(only)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<12} ({r.seconds:6.2f}s)  {r.detail}")
    if args.dump:
        _write_debug_dump(args.dump)
        print(f"debug record written to {args.dump}")
    return 0 if all(r.passed for r in results) else 3


def _write_debug_dump(path: str) -> None:
    import numpy as np

    from .entropy import build_adjacency, entropy_report, hard_assignment
    from .softbins import distance_matrix, soften
    from .verify import _random_instance

    rng = np.random.default_rng(0)
    h, labels, n, d, r = _random_instance(rng, n=8, d=3, r=3)
    adj = build_adjacency(h)
    soft = soften(distance_matrix(rng.uniform(0.0, 5.0, size=adj.n),
                                  make_bins(0.0, 5.0, 3)))
    record = {
        "hard": entropy_report(adj, hard_assignment(labels, r)),
        "soft": entropy_report(adj, soft),
    }
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, sort_keys=True, indent=2)
        fh.write("\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as exc:
        return int(exc.code)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "train":
            return cmd_train(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "verify":
            return cmd_verify(args)
        raise AssertionError(f"unhandled command {args.command!r}")
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"bottletree: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
