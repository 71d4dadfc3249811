"""Command-line harness.

Three subcommands:

* ``plan``: run the baseline or optimized planner over a data source
  (CSV/libsvm file, synthetic spec, or a PREDICT clause bound against a
  catalog directory) and write a run report.
* ``bench-batching``: measure models-trained-per-hour for a list of batch
  sizes under both the per-model loop kernel and the matrix kernel.
* ``compare-search``: sweep strategies x budgets x seeds over one or more
  datasets and report the best validation error per cell.
"""

from __future__ import annotations

import argparse
import sys
import time

import yaml

from . import data as data_mod
from . import paq as paq_mod
from .executor import Engine
from .plan import baseline_plan, tupaq_plan
from .reports import plan_report, render_report, write_report
from .search import UnsupportedStrategyError, make_strategy
from .space import Configuration, load_space
from .train import ModelBatch, make_model, train_partial

DEFAULT_BATCH_SIZES = "1,2,5,8,10,15,20"
DEFAULT_BUDGETS = "16,81,256,625"
DEFAULT_STRATEGIES = "grid,random,tpe"


def _parse_synth(spec: str) -> tuple[int, int, float]:
    parts = spec.split(",")
    if len(parts) not in (2, 3):
        raise ValueError(f"--synth expects 'n,d[,noise]', got {spec!r}")
    n, d = int(parts[0]), int(parts[1])
    noise = float(parts[2]) if len(parts) == 3 else 0.0
    return n, d, noise


def _tpe_overrides(space_path: str) -> dict:
    """Optional ``tpe:`` block in the space file (gamma, n_startup, n_candidates)."""
    with open(space_path) as fh:
        doc = yaml.safe_load(fh) or {}
    block = doc.get("tpe") or {}
    allowed = {"gamma", "n_startup", "n_candidates"}
    return {k: v for k, v in block.items() if k in allowed}


def _load_split(args) -> tuple[data_mod.DataSplit, str]:
    if getattr(args, "paq", None):
        if not args.catalog:
            raise ValueError("--paq requires --catalog")
        query = paq_mod.parse_predict_clause(args.paq)
        catalog = paq_mod.load_catalog(args.catalog)
        bound = paq_mod.bind(query, catalog, seed=args.seed)
        return bound.split, f"paq:{query.training_relation}"
    if getattr(args, "data", None):
        ds = data_mod.load_any(args.data)
        return data_mod.split(ds, seed=args.seed), f"file:{args.data}"
    if getattr(args, "synth", None):
        n, d, noise = _parse_synth(args.synth)
        ds = data_mod.synth(n, d, seed=args.seed, noise_rate=noise)
        return data_mod.split(ds, seed=args.seed), f"synth:{args.synth}"
    raise ValueError("provide a data source: --data, --synth, or --paq with --catalog")


def cmd_plan(args) -> int:
    space = load_space(args.space)
    split, source = _load_split(args)
    max_iters = args.max_iters
    if args.budget_models is not None:
        budget_models = args.budget_models
    elif args.budget_iters is not None:
        budget_models = max(1, args.budget_iters // max_iters)
    else:
        budget_models = 16
    budget_iters = args.budget_iters if args.budget_iters is not None \
        else budget_models * max_iters

    engine = Engine(sched_delay=args.sched_delay / 1000.0)
    knobs = {
        "source": source, "space": args.space, "planner": args.planner,
        "strategy": args.strategy, "budget_models": budget_models,
        "budget_iters": budget_iters, "batch": args.batch,
        "partial_iters": args.partial_iters, "max_iters": max_iters,
        "epsilon": args.epsilon, "bandit": args.bandit,
        "batching": args.batching, "kernel": args.kernel,
        "sched_delay_ms": args.sched_delay, "seed": args.seed,
    }
    if args.planner == "baseline":
        result = baseline_plan(split, space, budget_models, max_iters,
                               kernel=args.kernel, base_seed=args.seed, engine=engine)
    else:
        tpe_options = _tpe_overrides(args.space) if args.strategy == "tpe" else {}
        strategy = make_strategy(args.strategy, space, args.seed,
                                 budget_models=budget_models, **tpe_options)
        result = tupaq_plan(
            split, space, budget_iters, strategy,
            partial_iters=args.partial_iters, batch_size=args.batch,
            epsilon=args.epsilon, max_iterations=max_iters,
            bandit=args.bandit == "on", batching=args.batching == "on",
            kernel=args.kernel, base_seed=args.seed, engine=engine)
    text = plan_report(result, knobs,
                       sim_overhead_seconds=engine.sim_overhead_seconds)
    write_report(text, args.out)
    return 0


def cmd_bench_batching(args) -> int:
    n, d, noise = _parse_synth(args.synth)
    ds = data_mod.synth(n, d, seed=args.seed, noise_rate=noise)
    split = data_mod.split(ds, seed=args.seed)
    batch_sizes = [int(b) for b in args.batches.split(",")]
    # Small step size keeps every model finite for the full measurement.
    eta = 0.01 / split.train.n
    rows = []
    throughput: dict[tuple[str, int], float] = {}
    for kernel in ("naive", "matrix"):
        for k in batch_sizes:
            models = [make_model(Configuration(None, {"lr": eta}), split.train.dim,
                                 args.seed, model_id=i) for i in range(k)]
            start = time.perf_counter()
            train_partial(ModelBatch(models), split, args.iters, kernel=kernel)
            elapsed = time.perf_counter() - start
            mph = 3600.0 * k / max(elapsed, 1e-9)
            throughput[(kernel, k)] = mph
            rows.append((kernel, k, f"{elapsed:.4f}", f"{mph:.2f}",
                         f"{mph / throughput[(kernel, batch_sizes[0])]:.2f}"))
    summary = {}
    for kernel in ("naive", "matrix"):
        base = throughput[(kernel, batch_sizes[0])]
        best_k = max(batch_sizes, key=lambda k: throughput[(kernel, k)])
        summary[f"{kernel}_best_batch"] = best_k
        summary[f"{kernel}_best_speedup"] = f"{throughput[(kernel, best_k)] / base:.2f}"
    knobs = {"synth": args.synth, "batches": args.batches, "iters": args.iters,
             "seed": args.seed}
    text = render_report(
        "bench-batching", knobs,
        ("kernel", "batch_size", "seconds", "models_per_hour", "speedup_vs_batch_1"),
        rows, summary)
    write_report(text, args.out)
    return 0


def cmd_compare_search(args) -> int:
    space = load_space(args.space)
    strategies = [s.strip() for s in args.strategies.split(",")]
    budgets = [int(b) for b in args.budgets.split(",")]
    synth_specs = args.synth or ["2000,20,0.05", "2000,20,0.1", "2000,20,0.15",
                                 "2000,20,0.2", "2000,20,0.25"]
    rows = []
    cells: dict[tuple[str, int], list[float]] = {}
    for spec in synth_specs:
        n, d, noise = _parse_synth(spec)
        for seed_offset in range(args.seeds):
            seed = args.seed + seed_offset
            ds = data_mod.synth(n, d, seed=seed, noise_rate=noise)
            split = data_mod.split(ds, seed=seed)
            for kind in strategies:
                for budget in budgets:
                    try:
                        strategy = make_strategy(kind, space, seed, budget_models=budget)
                        result = tupaq_plan(
                            split, space, budget * args.max_iters, strategy,
                            partial_iters=args.max_iters, batch_size=args.batch,
                            max_iterations=args.max_iters, bandit=False,
                            kernel=args.kernel, base_seed=seed)
                        err = result.best.val_error if result.best else 1.0
                        rows.append((spec, kind, budget, seed, repr(err),
                                     result.scans_used, "ok"))
                        cells.setdefault((kind, budget), []).append(err)
                    except (UnsupportedStrategyError, ValueError) as exc:
                        rows.append((spec, kind, budget, seed, "", 0, f"error:{exc}"))
    summary = {}
    for (kind, budget), errs in sorted(cells.items()):
        errs = sorted(errs)
        median = errs[len(errs) // 2]
        summary[f"median_{kind}_{budget}"] = repr(median)
    knobs = {"space": args.space, "strategies": args.strategies,
             "budgets": args.budgets, "seeds": args.seeds,
             "max_iters": args.max_iters, "seed": args.seed,
             "datasets": ";".join(synth_specs)}
    text = render_report(
        "compare-search", knobs,
        ("dataset", "strategy", "budget", "seed", "best_val_error", "scans", "status"),
        rows, summary)
    write_report(text, args.out)
    if args.plot:
        _plot_compare(cells, strategies, budgets, args.plot)
    return 0


def _plot_compare(cells, strategies, budgets, path: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for kind in strategies:
        xs, ys = [], []
        for budget in budgets:
            errs = sorted(cells.get((kind, budget), []))
            if errs:
                xs.append(budget)
                ys.append(errs[len(errs) // 2])
        if xs:
            ax.plot(xs, ys, marker="o", label=kind)
    ax.set_xscale("log")
    ax.set_xlabel("budget (models trained)")
    ax.set_ylabel("median best validation error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="report file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paqplan",
        description="Model-search planner: search strategies, bandit pruning, "
                    "and shared-scan batched training under an iteration budget.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run a planner and write a run report")
    p.add_argument("--data", help="CSV or libsvm data file (last column / leading label)")
    p.add_argument("--synth", help="synthetic data spec 'n,d[,noise]'")
    p.add_argument("--paq", help="predictive clause, e.g. 'PREDICT(t) GIVEN R'")
    p.add_argument("--catalog", help="directory of headered relation CSVs for --paq")
    p.add_argument("--space", required=True, help="search-space YAML file")
    p.add_argument("--planner", choices=("tupaq", "baseline"), default="tupaq")
    p.add_argument("--strategy", default="random",
                   choices=("grid", "random", "tpe", "nelder-mead", "powell"))
    p.add_argument("--budget-models", type=int, default=None)
    p.add_argument("--budget-iters", type=int, default=None)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--partial-iters", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--bandit", choices=("on", "off"), default="on")
    p.add_argument("--batching", choices=("on", "off"), default="on")
    p.add_argument("--kernel", choices=("matrix", "naive"), default="matrix")
    p.add_argument("--sched-delay", type=float, default=0.0,
                   help="simulated scheduling delay per task, milliseconds")
    _add_common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench-batching",
                       help="measure batched-training throughput per kernel")
    p.add_argument("--synth", default="20000,200,0.1")
    p.add_argument("--batches", default=DEFAULT_BATCH_SIZES)
    p.add_argument("--iters", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_bench_batching)

    p = sub.add_parser("compare-search",
                       help="sweep strategies and budgets across datasets")
    p.add_argument("--space", required=True)
    p.add_argument("--synth", action="append",
                   help="synthetic dataset spec; repeatable (default: 5 noisy sets)")
    p.add_argument("--strategies", default=DEFAULT_STRATEGIES)
    p.add_argument("--budgets", default=DEFAULT_BUDGETS)
    p.add_argument("--seeds", type=int, default=1, help="seeds per cell")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--kernel", choices=("matrix", "naive"), default="matrix")
    p.add_argument("--plot", default=None, help="optional SVG/PNG output path")
    _add_common(p)
    p.set_defaults(func=cmd_compare_search)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"paqplan: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
