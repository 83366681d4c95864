"""Command-line entry point.

Subcommands: fetch, run, sweep, report, verify. Exit codes: 0 success,
1 invariant/verification failure, 2 usage or config error.
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import data as data_mod
from . import experiments, report
from .errors import ConfigError, InfoplaneError, SchemaVersionError
from .verify import verify_result

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

KNOWN_DATASETS = sorted(data_mod.DATASET_FILES) + ["synthetic"]


def _build_parser():
    p = argparse.ArgumentParser(
        prog="infoplane",
        description="Train small CNNs and chart per-layer mutual information "
        "across training.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fetch", help="download (or generate) a dataset into the cache")
    f.add_argument("dataset", help=f"one of {KNOWN_DATASETS}")
    f.add_argument("--cache-dir", default=None,
                   help=f"cache directory (default: ${data_mod.CACHE_ENV_VAR} or ~/.cache/infoplane)")

    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("config", help="JSON experiment config")
    r.add_argument("-o", "--out", required=True, help="output result file (JSON)")
    r.add_argument("--profile", choices=sorted(experiments.PROFILES), default=None,
                   help="override split sizes / batch / schedule with a preset")
    r.add_argument("--seed", type=int, default=None, help="override run_seed")
    r.add_argument("--cache-dir", default=None)

    s = sub.add_parser("sweep", help="run a predefined sweep family")
    s.add_argument("family")
    s.add_argument("-o", "--out-dir", required=True)
    s.add_argument("--profile", choices=sorted(experiments.PROFILES), default="desk")
    s.add_argument("--dataset", default=None,
                   help="dataset for non-CIFAR families (default mnist; cifar families "
                        "always use cifar10)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1, help="run variants concurrently")
    s.add_argument("--epochs", type=int, default=None, help="override total epochs")
    s.add_argument("--cache-dir", default=None)

    rep = sub.add_parser("report", help="emit CSV and SVG figures from result files")
    rep.add_argument("results", nargs="+")
    rep.add_argument("-o", "--out-dir", required=True)

    v = sub.add_parser("verify", help="re-check invariants of a result file")
    v.add_argument("result")
    return p


def cmd_fetch(args) -> int:
    name = args.dataset
    if name not in KNOWN_DATASETS:
        print(f"error: unknown dataset {name!r}; known: {KNOWN_DATASETS}", file=sys.stderr)
        return EXIT_USAGE
    cache = Path(args.cache_dir) if args.cache_dir else data_mod.default_cache_dir()
    if name == "synthetic":
        from .synthetic import ensure_synthetic_corpus

        ddir = ensure_synthetic_corpus(cache)
        print(f"synthetic corpus ready in {ddir}")
        return EXIT_OK
    before = {
        p: p.stat().st_mtime
        for p in (cache / name).glob("*")
        if (cache / name).exists()
    }
    paths = data_mod.fetch_all(name, cache_dir=cache)
    for p in paths:
        status = "cache hit" if before.get(p) == p.stat().st_mtime else "downloaded"
        print(f"{status}: {p}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = experiments.load_config(args.config)
    if args.profile:
        prof = experiments.PROFILES[args.profile]
        epochs = prof["total_epochs"]
        config = experiments.ExperimentConfig(
            dataset=experiments.DatasetConfig(
                config.dataset.name, prof["train_count"], prof["test_count"],
                config.dataset.seed,
            ),
            architecture=config.architecture,
            optimizer=experiments.OptimizerConfig(
                config.optimizer.learning_rate, prof["batch_size"]
            ),
            schedule=experiments.ScheduleConfig(
                epochs,
                experiments.measurement_schedule(epochs, prof["measurement_points"]),
            ),
            bin_size=config.bin_size,
            run_seed=config.run_seed,
        )
    if args.seed is not None:
        config = experiments.ExperimentConfig(
            dataset=config.dataset, architecture=config.architecture,
            optimizer=config.optimizer, schedule=config.schedule,
            bin_size=config.bin_size, run_seed=args.seed,
        )

    def progress(info):
        print(
            f"epoch {info['epoch']:>5}  loss {info['train_loss']:.4f}  "
            f"train_acc {info['train_acc']:.3f}  test_acc {info['test_acc']:.3f}  "
            f"I(X;T_out) {info['final_layer_i_xt']:.3f}  "
            f"I(Y;T_out) {info['final_layer_i_ty']:.3f}"
        )

    result = experiments.run_experiment(config, cache_dir=args.cache_dir,
                                        progress=progress)
    experiments.persist_run(result, args.out)
    print(f"wrote {args.out} (run {result.run_id}, "
          f"{result.wall_clock_seconds:.1f}s)")
    return EXIT_OK


def _run_variant(job):
    family, name, config_doc, cache_dir, out_path = job
    config = experiments.config_from_dict(config_doc)
    result = experiments.run_experiment(config, cache_dir=cache_dir,
                                        sweep=family, variant=name)
    experiments.persist_run(result, out_path)
    return out_path


def cmd_sweep(args) -> int:
    kw = {"profile": args.profile, "run_seed": args.seed}
    if args.dataset:
        kw["dataset"] = args.dataset
    try:
        sweep = experiments.sweep_by_name(args.family, **kw)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = []
    for name, config in sweep.variants:
        if args.epochs is not None:
            config = experiments.ExperimentConfig(
                dataset=config.dataset, architecture=config.architecture,
                optimizer=config.optimizer,
                schedule=experiments.ScheduleConfig(
                    args.epochs,
                    experiments.measurement_schedule(
                        args.epochs,
                        min(args.epochs, experiments.PROFILES[args.profile]["measurement_points"]),
                    ),
                ),
                bin_size=config.bin_size, run_seed=config.run_seed,
            )
        jobs.append((
            sweep.family, name, experiments.config_to_dict(config),
            args.cache_dir, str(out_dir / f"{sweep.family}__{name}.json"),
        ))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            paths = list(pool.map(_run_variant, jobs))
    else:
        paths = [_run_variant(j) for j in jobs]
    for p in paths:
        print(f"wrote {p}")

    results = [experiments.load_run(p) for p in paths]
    report.emit_csv(results, out_dir / f"{sweep.family}.csv")
    print(f"wrote {out_dir / (sweep.family + '.csv')}")
    for result in results:
        for split in ("train", "test"):
            fig = out_dir / f"{sweep.family}__{result.variant}__{split}.svg"
            report.emit_mi_epoch_svg(result, split, fig)
            ip = out_dir / f"{sweep.family}__{result.variant}__{split}__plane.svg"
            report.emit_infoplane_svg(result, split, ip)
    print(f"wrote figures to {out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = [experiments.load_run(p) for p in args.results]
    report.emit_csv(results, out_dir / "mi_records.csv")
    for result in results:
        stem = result.variant or result.run_id
        for split in ("train", "test"):
            report.emit_mi_epoch_svg(result, split, out_dir / f"{stem}__{split}.svg")
            report.emit_infoplane_svg(result, split,
                                      out_dir / f"{stem}__{split}__plane.svg")
    print(f"wrote report artifacts to {out_dir}")
    return EXIT_OK


def cmd_verify(args) -> int:
    result = experiments.load_run(args.result)
    outcomes, warnings = verify_result(result)
    width = max(len(o.name) for o in outcomes)
    failed = False
    for o in outcomes:
        mark = "PASS" if o.passed else "FAIL"
        failed = failed or not o.passed
        print(f"{o.name:<{width}}  {mark}  {o.detail}")
    for w in warnings:
        print(f"warning: {w}")
    return EXIT_FAIL if failed else EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "fetch": cmd_fetch,
        "run": cmd_run,
        "sweep": cmd_sweep,
        "report": cmd_report,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, SchemaVersionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfoplaneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
