"""Command line interface: ``heretic {run,train,extract,report}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import sys

from heretic.dataset import DataError, fit_encoder
from heretic.eval import Report
from heretic.network import load_network, save_network, train
from heretic.pipeline import (
    ConfigError,
    ExperimentConfig,
    PipelineError,
    run_seed,
    extract_only,
    load_problem,
    run_experiment,
    splits,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PIPELINE = 0, 2, 3, 4

OVERRIDES = {
    "dataset": (str, "bundled dataset name or CSV path"),
    "test": (str, "test CSV for a fixed train/test split"),
    "schema": (str, "schema file, or 'infer'"),
    "hidden": (str, "hidden layer sizes, e.g. '11,3', or 'auto'"),
    "epochs": (int, "training epochs"),
    "folds": (int, "cross-validation folds when no test file is given"),
    "repeats": (int, "repetitions of the whole protocol"),
    "seed": (int, "master seed"),
    "neuron_trees": (str, "auto, pruned (grow/prune split) or full (all training rows, unpruned)"),
    "minimizer": (str, "auto, exact, heuristic or none"),
    "methods": (str, "comma-separated subset of heretic,c45,trepan_lite"),
    "output": (str, "directory for report, rules, timings and network"),
}


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI file; command-line options override it")
    p.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    for name, (kind, text) in OVERRIDES.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, help=text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heretic", description="Extract rules from steep-sigmoid networks.")
    parser.add_argument("--print-config", action="store_true", help="print the default configuration and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("run", help="train, extract and evaluate end to end")
    _add_config_args(p)
    p.add_argument("--json", action="store_true", help="print the JSON report instead of tables")
    p.add_argument("--quiet", action="store_true", help="no per-run progress on stderr")

    p = sub.add_parser("train", help="train the first run's network and save it")
    _add_config_args(p)
    p.add_argument("--network", required=True, help="where to write the network JSON")

    p = sub.add_parser("extract", help="extract rules from a saved network")
    _add_config_args(p)
    p.add_argument("--network", required=True, help="network JSON written by 'train' or 'run'")
    p.add_argument("--rules", help="write the ruleset here instead of stdout")

    p = sub.add_parser("report", help="re-render a stored JSON report")
    p.add_argument("report", help="report.json written by 'run'")
    p.add_argument("--json", action="store_true", help="print normalized JSON instead of tables")
    return parser


def load_config(args) -> ExperimentConfig:
    overrides = {k: getattr(args, k, None) for k in OVERRIDES}
    if getattr(args, "config", None):
        return ExperimentConfig.load(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _progress(run):
    r = run.record
    print(
        f"[{r.dataset}] repeat {r.repeat} fold {r.fold}: "
        f"accuracy {r.accuracy['heretic']:.3f} fidelity {r.fidelity['heretic']:.3f}",
        file=sys.stderr,
    )


def cmd_run(args, cfg: ExperimentConfig) -> int:
    report, _ = run_experiment(cfg, None if args.quiet else _progress)
    sys.stdout.write(report.to_json() if args.json else report.to_text())
    return EXIT_OK


def cmd_train(args, cfg: ExperimentConfig) -> int:
    problem = load_problem(cfg)
    train_idx, _ = splits(problem, cfg, 0)[0]
    raw = problem.data.subset(train_idx)
    ds = fit_encoder(raw).transform(raw)
    net_cfg = cfg.network_config(ds.X.shape[1], len(ds.classes), run_seed(cfg.seed, 0, 0))
    try:
        net = train(ds.X, ds.targets, net_cfg, input_names=ds.feature_names, classes=ds.classes)
    except Exception as e:
        raise PipelineError("train", e) from e
    save_network(net, args.network)
    print(f"wrote {args.network}")
    return EXIT_OK


def cmd_extract(args, cfg: ExperimentConfig) -> int:
    try:
        net = load_network(args.network)
    except (OSError, ValueError, KeyError) as e:
        raise DataError(f"cannot load network: {e}") from e
    text = extract_only(net, cfg).to_text()
    if args.rules:
        with open(args.rules, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        with open(args.report) as fh:
            report = Report.from_dict(json.load(fh))
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise DataError(f"cannot read report: {e}") from e
    sys.stdout.write(report.to_json() if args.json else report.to_text())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command is None:
            if args.print_config:
                sys.stdout.write(ExperimentConfig().to_ini())
                return EXIT_OK
            parser.print_help()
            return EXIT_CONFIG
        if args.command == "report":
            return cmd_report(args)
        cfg = load_config(args)
        if args.print_config:
            sys.stdout.write(cfg.to_ini())
            return EXIT_OK
        return {"run": cmd_run, "train": cmd_train, "extract": cmd_extract}[args.command](args, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except PipelineError as e:
        print(f"pipeline error in stage {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
