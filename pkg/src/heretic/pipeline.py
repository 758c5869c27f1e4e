"""End-to-end extraction: train, sample neurons, grow trees, substitute, minimize, score."""

from __future__ import annotations

import configparser
import io
import os
import time
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from heretic.baselines import c45_direct, trepan_lite
from heretic.dataset import (
    DataError,
    Dataset,
    bundled_path,
    fit_encoder,
    load_dataset,
    stratified_kfold,
    train_prune_split,
)
from heretic.eval import Report, RunRecord, accuracy, fidelity
from heretic.minimizer import BooleanSpace, minimize
from heretic.network import Network, NetworkConfig, predict, save_network, train
from heretic.rules import (
    MAX_TERMS,
    DNF,
    Ruleset,
    rank_by_support,
    resolve,
    rule_complexity,
    ruleset_predict,
    substitute,
    tree_to_dnf,
)
from heretic.sampler import ambiguous_fraction, collect_neuron_samples
from heretic.tree import BINARY, REAL, DecisionTree, induce, prune

# bundled benchmark files: (training file, test file or None for k-fold)
BUNDLED = {
    "monks-1": ("monks-1.train.csv", "monks-1.test.csv"),
    "monks-2": ("monks-2.train.csv", "monks-2.test.csv"),
    "monks-3": ("monks-3.train.csv", "monks-3.test.csv"),
    "vote": ("vote.csv", None),
    "breast-cancer": ("breast-cancer.csv", None),
    "heart-disease": ("heart-disease.csv", None),
    "promoters": ("promoters.csv", None),
}

# hidden layer sizes used for the benchmark datasets
ARCHITECTURES = {
    "monks-1": (10,),
    "monks-2": (10,),
    "monks-3": (11,),
    "vote": (6,),
    "breast-cancer": (11, 3),
    "heart-disease": (14, 6),
    "promoters": (20,),
}

# how neuron trees are grown where "auto" is asked for; the Monks problems
# have exact logical targets, so unpruned trees over every training row
# follow the network more closely there
NEURON_TREES = {"monks-1": "full", "monks-2": "full", "monks-3": "full"}

TITLES = {
    "monks-1": "Monks 1",
    "monks-2": "Monks 2",
    "monks-3": "Monks 3",
    "vote": "Vote",
    "breast-cancer": "Breast Cancer",
    "heart-disease": "Heart Disease",
    "promoters": "Promoters",
}

METHOD_NAMES = ("heretic", "c45", "trepan_lite")

# share of activations away from 0/1 above which a run carries a warning
AMBIGUOUS_WARNING = 0.05


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = error


@dataclass
class ExperimentConfig:
    """Every knob of an experiment, grouped as in the INI file."""

    # [data]
    dataset: str = "monks-1"
    test: str = ""
    schema: str = "infer"
    header: bool = True
    folds: int = 10
    prune_fraction: float = 0.2
    # [network]
    hidden: str = "auto"
    steepness: float = 100.0
    learning_rate: float = 0.002
    epochs: int = 200
    weight_decay: float = 1e-4
    init_scale: float = 0.1
    lr_schedule: str = "inverse_epoch"
    target_low: float = 0.1
    # [extraction]
    min_leaf: int = 2
    neuron_trees: str = "auto"
    pruning: str = "collapse_ties"
    minimizer: str = "auto"
    term_limit: int = MAX_TERMS
    # [experiment]
    repeats: int = 20
    seed: int = 0
    methods: str = "heretic,c45,trepan_lite"
    # [output]
    output: str = ""

    SECTIONS = {
        "data": ("dataset", "test", "schema", "header", "folds", "prune_fraction"),
        "network": ("hidden", "steepness", "learning_rate", "epochs", "weight_decay",
                    "init_scale", "lr_schedule", "target_low"),
        "extraction": ("min_leaf", "neuron_trees", "pruning", "minimizer", "term_limit"),
        "experiment": ("repeats", "seed", "methods"),
        "output": ("output",),
    }

    def __post_init__(self):
        types = {f.name: f.type for f in fields(self)}
        for name, kind in types.items():
            value = getattr(self, name)
            try:
                if kind == "bool" and isinstance(value, str):
                    value = value.strip().lower() in ("1", "true", "yes", "on")
                elif kind in ("int", "float", "bool"):
                    value = {"int": int, "float": float, "bool": bool}[kind](value)
            except ValueError as e:
                raise ConfigError(f"{name}: {e}") from None
            setattr(self, name, value)
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if not 0.0 < self.prune_fraction < 1.0:
            raise ConfigError("prune_fraction must lie in (0, 1)")
        if self.neuron_trees not in ("auto", "pruned", "full"):
            raise ConfigError(f"neuron_trees must be auto, pruned or full, got {self.neuron_trees!r}")
        if self.pruning not in ("keep_ties", "collapse_ties"):
            raise ConfigError(f"pruning must be keep_ties or collapse_ties, got {self.pruning!r}")
        if self.minimizer not in ("auto", "exact", "heuristic", "none"):
            raise ConfigError(f"unknown minimizer mode {self.minimizer!r}")
        unknown = set(self.method_list) - set(METHOD_NAMES)
        if unknown or "heretic" not in self.method_list:
            raise ConfigError(f"methods must include heretic and come from {METHOD_NAMES}")
        self.hidden_layers  # validates
        if self.dataset not in BUNDLED and not os.path.exists(self.dataset):
            raise ConfigError(f"dataset {self.dataset!r} is neither bundled nor an existing file")
        if self.test and not os.path.exists(self.test):
            raise ConfigError(f"test file {self.test!r} does not exist")
        if self.schema != "infer" and not os.path.exists(self.schema):
            raise ConfigError(f"schema file {self.schema!r} does not exist")

    @property
    def method_list(self) -> list[str]:
        return [m.strip() for m in self.methods.split(",") if m.strip()]

    @property
    def keep_ties(self) -> bool:
        return self.pruning == "keep_ties"

    @property
    def full_trees(self) -> bool:
        if self.neuron_trees == "auto":
            return NEURON_TREES.get(self.dataset, "pruned") == "full"
        return self.neuron_trees == "full"

    @property
    def hidden_layers(self) -> tuple[int, ...]:
        if self.hidden == "auto":
            return ARCHITECTURES.get(self.dataset, (10,))
        try:
            sizes = tuple(int(s) for s in str(self.hidden).split(","))
        except ValueError:
            raise ConfigError(f"hidden must be 'auto' or comma-separated sizes, got {self.hidden!r}") from None
        if not sizes or min(sizes) < 1:
            raise ConfigError("hidden layer sizes must be positive")
        return sizes

    @property
    def title(self) -> str:
        return TITLES.get(self.dataset, os.path.splitext(os.path.basename(self.dataset))[0])

    def network_config(self, n_inputs: int, n_classes: int, seed: int) -> NetworkConfig:
        return NetworkConfig(
            (n_inputs, *self.hidden_layers, n_classes),
            steepness=self.steepness,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            weight_decay=self.weight_decay,
            seed=seed,
            init_scale=self.init_scale,
            lr_schedule=self.lr_schedule,
            target_low=self.target_low,
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for section, keys in self.SECTIONS.items():
            cp[section] = {k: str(getattr(self, k)) for k in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, **overrides) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(str(e)) from None
        values = {}
        for section in cp.sections():
            if section not in cls.SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            for key, value in cp[section].items():
                if key not in cls.SECTIONS[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        return cls.from_ini(text, **overrides)


# -- data ------------------------------------------------------------------


@dataclass
class Problem:
    """Raw dataset plus its fixed split, if any (training rows come first)."""

    data: Dataset
    n_train: int | None


def load_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.dataset in BUNDLED:
        train_file, test_file = BUNDLED[cfg.dataset]
        path = bundled_path(train_file)
        test = bundled_path(test_file) if test_file and not cfg.test else cfg.test
    else:
        path, test = cfg.dataset, cfg.test
    if test:
        train_ds, test_ds = load_dataset(path, cfg.schema, header=cfg.header, extra_paths=[test])
        data = Dataset(train_ds.schema, list(train_ds.X) + list(test_ds.X), train_ds.y + test_ds.y, train_ds.classes)
        return Problem(data, len(train_ds))
    return Problem(load_dataset(path, cfg.schema, header=cfg.header), None)


def run_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def splits(problem: Problem, cfg: ExperimentConfig, repeat: int) -> list[tuple[list[int], list[int]]]:
    """(train, test) index lists of every fold of one repeat."""
    n = len(problem.data)
    if problem.n_train is not None:
        return [(list(range(problem.n_train)), list(range(problem.n_train, n)))]
    plan = stratified_kfold(problem.data, cfg.folds, run_seed(cfg.seed, repeat))
    return [plan.train_test(f) for f in range(cfg.folds)]


def _kinds(ds: Dataset) -> list[str]:
    return [BINARY if f.kind == "binary" else REAL for f in ds.schema]


# -- extraction ------------------------------------------------------------


@dataclass
class Extraction:
    """Everything produced from one trained network."""

    trees: dict[str, DecisionTree]
    layers: list[list[str]]
    substituted: Ruleset
    ruleset: Ruleset
    timings: dict[str, float] = field(default_factory=dict)
    modes: dict[str, str] = field(default_factory=dict)


def _stage(name, timings, fn, *args, **kw):
    start = time.perf_counter()
    try:
        return fn(*args, **kw)
    except PipelineError:
        raise
    except Exception as e:
        raise PipelineError(name, e) from e
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def _grow_trees(net: Network, grow: Dataset, held: Dataset, min_leaf: int, keep_ties: bool, full: bool):
    names, kinds = grow.feature_names, _kinds(grow)
    layers = [net.unit_names(k) for k in range(1, len(net.weights) + 1)]
    if full:
        sets = collect_neuron_samples(net, np.vstack([grow.X, held.X]), names, kinds)
        return {s.symbol: induce(s, min_leaf) for s in sets}, layers
    grow_sets = collect_neuron_samples(net, grow.X, names, kinds)
    held_sets = collect_neuron_samples(net, held.X, names, kinds)
    trees = {}
    for g, h in zip(grow_sets, held_sets):
        trees[g.symbol] = prune(induce(g, min_leaf), h, keep_ties)
    return trees, layers


def _to_rules(trees, net: Network, schema, limit, compact: bool) -> Ruleset:
    neuron_rules = {}
    for sym, t in trees.items():
        pair = tree_to_dnf(t, sym)
        if compact:
            # equivalent neuron rules give equivalent substituted rules, and
            # shorter ones keep the distribution step small
            space = BooleanSpace.from_schema(schema, pair)
            pair = tuple(DNF(minimize(d, space).terms, d.consequent) for d in pair)
        neuron_rules[sym] = pair
    input_names = [f.name for f in schema]
    outputs = dict(zip(net.classes, net.unit_names(len(net.weights))))
    return substitute(neuron_rules, outputs, input_names, limit)


def _minimize_rules(r: Ruleset, schema, mode: str) -> tuple[Ruleset, dict[str, str]]:
    if mode == "none":
        return r, {}
    rules, modes = {}, {}
    for c, dnf in r.rules.items():
        space = BooleanSpace.from_schema(schema, [dnf])
        small = space.n <= 16 and len(dnf.terms) <= 1024
        use = mode if mode != "auto" else ("exact" if small else "heuristic")
        rules[c] = DNF(minimize(dnf, space, use).terms, c)
        modes[c] = use
    return Ruleset(rules, r.default, r.priority, r.input_names, r.rounds, r.support), modes


def extract(
    net: Network,
    grow: Dataset,
    held: Dataset,
    *,
    min_leaf: int = 2,
    keep_ties: bool = False,
    full_trees: bool = False,
    minimizer: str = "auto",
    term_limit: int = MAX_TERMS,
) -> Extraction:
    """Rules from a trained network: trees on ``grow``, pruned on ``held``.

    With ``full_trees`` the trees are grown on both row sets and left unpruned.

    The default class is the majority label of the grow and held rows
    together; class priority follows rule support on those rows.
    """
    if net.n_inputs != len(grow.feature_names) or (net.input_names and net.input_names != grow.feature_names):
        raise PipelineError("extract", DataError("network inputs do not match the encoded dataset"))
    timings: dict[str, float] = {}
    trees, layers = _stage("trees", timings, _grow_trees, net, grow, held, min_leaf, keep_ties, full_trees)
    X_all = np.vstack([grow.X, held.X])
    raw = _stage("substitute", timings, _to_rules, trees, net, grow.schema, term_limit, minimizer != "none")
    labels = list(grow.y) + list(held.y)
    counts = {c: labels.count(c) for c in net.classes}
    default = max(net.classes, key=lambda c: (counts[c], -net.classes.index(c)))
    ranked = rank_by_support(raw, X_all, default)
    final, modes = _stage("minimize", timings, _minimize_rules, ranked, grow.schema, minimizer)
    return Extraction(trees, layers, ranked, final, timings, modes)


def cascade_predict(trees: dict[str, DecisionTree], layers: list[list[str]], r: Ruleset, X) -> list[str]:
    """Classes obtained by running the per-neuron trees layer by layer.

    Output bits are resolved with the priority and default of ``r``.
    """
    bits = np.atleast_2d(np.asarray(X, dtype=float))
    for symbols in layers:
        bits = np.column_stack([trees[s].route(bits) for s in symbols]).astype(float)
    # the last layer holds one output unit per class, in class order
    return resolve(bits > 0.5, r.classes, r.priority, r.default)


# -- experiments -----------------------------------------------------------


@dataclass
class Run:
    record: RunRecord
    ruleset: Ruleset
    network: Network


def run_fold(problem: Problem, cfg: ExperimentConfig, repeat: int, fold: int, train_idx, test_idx) -> Run:
    timings: dict[str, float] = {}
    seed = run_seed(cfg.seed, repeat, fold)
    raw_train = problem.data.subset(train_idx)
    encoder = fit_encoder(raw_train)
    train_ds = encoder.transform(raw_train)
    test_ds = encoder.transform(problem.data.subset(test_idx))
    grow_idx, held_idx = train_prune_split(range(len(train_ds)), cfg.prune_fraction, seed + 1, train_ds.y)
    grow, held = train_ds.subset(grow_idx), train_ds.subset(held_idx)

    net_cfg = cfg.network_config(train_ds.X.shape[1], len(train_ds.classes), seed)
    net = _stage(
        "train", timings, train, train_ds.X, train_ds.targets, net_cfg,
        input_names=train_ds.feature_names, classes=train_ds.classes,
    )
    ties = cfg.keep_ties
    ex = extract(
        net, grow, held, min_leaf=cfg.min_leaf, keep_ties=ties, full_trees=cfg.full_trees,
        minimizer=cfg.minimizer, term_limit=cfg.term_limit,
    )
    timings.update(ex.timings)

    start = time.perf_counter()
    truth = list(test_ds.y)
    net_test = predict(net, test_ds.X)
    rules_test = ruleset_predict(ex.ruleset, test_ds.X)
    acc = {"network": accuracy(net_test, truth), "heretic": accuracy(rules_test, truth)}
    fid = {"heretic": fidelity(rules_test, net_test)}
    if "c45" in cfg.method_list:
        pred, _ = c45_direct(grow, held, test_ds, cfg.min_leaf, ties)
        acc["c45"] = accuracy(pred, truth)
    if "trepan_lite" in cfg.method_list:
        pred, fid["trepan_lite"] = trepan_lite(net, grow, held, test_ds, cfg.min_leaf, ties)
        acc["trepan_lite"] = accuracy(pred, truth)

    X_both = np.vstack([train_ds.X, test_ds.X])
    cascade = cascade_predict(ex.trees, ex.layers, ex.substituted, X_both)
    substituted = ruleset_predict(ex.substituted, X_both)
    minimized = ruleset_predict(ex.ruleset, X_both)
    timings["evaluate"] = time.perf_counter() - start

    classes, terms, lits = rule_complexity(ex.ruleset)
    notes = {
        "cascade_agreement": float(np.mean([a == b for a, b in zip(cascade, substituted)])),
        "minimized_agreement": float(np.mean([a == b for a, b in zip(minimized, substituted)])),
        "rounds": ex.substituted.rounds,
        "terms_before_minimization": rule_complexity(ex.substituted)[1],
        "minimizer": ex.modes,
        "train_accuracy_network": accuracy(predict(net, train_ds.X), list(train_ds.y)),
        "ambiguous_fraction": ambiguous_fraction(net, train_ds.X),
        "single_leaf_trees": [s for s, t in ex.trees.items() if t.root.is_leaf],
        "warnings": list(encoder.warnings),
    }
    if notes["ambiguous_fraction"] > AMBIGUOUS_WARNING:
        notes["warnings"].append(
            f"{100 * notes['ambiguous_fraction']:.1f}% of unit activations lie in (0.05, 0.95)"
        )
    record = RunRecord(cfg.title, repeat, fold, seed, acc, fid, classes, terms, lits, timings, notes)
    return Run(record, ex.ruleset, net)


def run_experiment(cfg: ExperimentConfig, progress=None) -> tuple[Report, list[Run]]:
    """Every repeat and fold of ``cfg``; writes artifacts when ``cfg.output`` is set."""
    try:
        problem = load_problem(cfg)
    except DataError:
        raise
    except OSError as e:
        raise DataError(str(e)) from e
    runs = []
    for repeat in range(cfg.repeats):
        for fold, (tr, te) in enumerate(splits(problem, cfg, repeat)):
            runs.append(run_fold(problem, cfg, repeat, fold, tr, te))
            if progress:
                progress(runs[-1])
    report = Report([r.record for r in runs], cfg.to_dict())
    if cfg.output:
        write_artifacts(cfg.output, report, runs)
    return report, runs


def rulesets_text(runs: Sequence[Run]) -> str:
    parts = []
    for run in runs:
        rec = run.record
        parts.append(f"## {rec.dataset} repeat {rec.repeat} fold {rec.fold}\n{run.ruleset.to_text()}")
    return "\n".join(parts)


def timing_log(runs: Sequence[Run]) -> str:
    stages = sorted({s for r in runs for s in r.record.timings})
    lines = ["dataset\trepeat\tfold\t" + "\t".join(stages)]
    for r in runs:
        rec = r.record
        cells = [f"{rec.timings.get(s, 0.0):.4f}" for s in stages]
        lines.append(f"{rec.dataset}\t{rec.repeat}\t{rec.fold}\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


def write_artifacts(directory, report: Report, runs: Sequence[Run]) -> dict[str, str]:
    """Report (JSON and text), rulesets, timings and the first run's network."""
    os.makedirs(directory, exist_ok=True)
    paths = {
        "report_json": os.path.join(directory, "report.json"),
        "report_text": os.path.join(directory, "report.txt"),
        "rules": os.path.join(directory, "rules.txt"),
        "timings": os.path.join(directory, "timings.tsv"),
        "network": os.path.join(directory, "network.json"),
    }
    with open(paths["report_json"], "w") as fh:
        fh.write(report.to_json())
    with open(paths["report_text"], "w") as fh:
        fh.write(report.to_text())
    with open(paths["rules"], "w") as fh:
        fh.write(rulesets_text(runs))
    with open(paths["timings"], "w") as fh:
        fh.write(timing_log(runs))
    save_network(runs[0].network, paths["network"])
    return paths


def extract_only(net: Network, cfg: ExperimentConfig) -> Ruleset:
    """Rules for a given network using the training rows of ``cfg``'s dataset.

    The grow/prune split is the one the first run of ``run_experiment``
    uses, so a network saved by that run yields the same ruleset.
    """
    problem = load_problem(cfg)
    train_idx, _ = splits(problem, cfg, 0)[0]
    raw_train = problem.data.subset(train_idx)
    train_ds = fit_encoder(raw_train).transform(raw_train)
    if net.n_inputs != train_ds.X.shape[1]:
        raise DataError(f"network expects {net.n_inputs} inputs, dataset encodes to {train_ds.X.shape[1]}")
    if net.classes and list(net.classes) != list(train_ds.classes):
        raise DataError("network classes do not match the dataset classes")
    seed = run_seed(cfg.seed, 0, 0)
    grow_idx, held_idx = train_prune_split(range(len(train_ds)), cfg.prune_fraction, seed + 1, train_ds.y)
    ex = extract(
        net, train_ds.subset(grow_idx), train_ds.subset(held_idx),
        min_leaf=cfg.min_leaf, keep_ties=cfg.keep_ties, full_trees=cfg.full_trees, minimizer=cfg.minimizer, term_limit=cfg.term_limit,
    )
    return ex.ruleset


__all__ = [
    "ARCHITECTURES",
    "BUNDLED",
    "ConfigError",
    "ExperimentConfig",
    "Extraction",
    "PipelineError",
    "Run",
    "cascade_predict",
    "extract",
    "extract_only",
    "load_problem",
    "run_experiment",
    "run_fold",
    "write_artifacts",
]
