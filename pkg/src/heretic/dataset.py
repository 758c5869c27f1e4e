"""Tabular classification data: CSV loading, one-hot/min-max encoding and splits.

Raw datasets keep the values as read (strings for nominal features, floats for
real ones, 0/1 ints for binary ones). ``encode`` turns them into a float matrix
whose columns are either bits or reals scaled to [0, 1].
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Sequence

import numpy as np

KINDS = ("binary", "nominal", "real")
MISSING = ("?", "")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    values: tuple[str, ...] = ()
    min: float | None = None
    max: float | None = None
    # source nominal feature for one-hot columns; drives exclusivity groups
    group: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "nominal":
            if not self.values:
                raise DataError(f"feature {self.name!r}: empty nominal value list")
            if len(set(self.values)) != len(self.values):
                raise DataError(f"feature {self.name!r}: duplicate nominal values")
        if self.kind == "real" and self.min is not None and self.max is not None:
            if not self.min < self.max:
                raise DataError(f"feature {self.name!r}: min must be < max")

    def encoded_names(self) -> list[str]:
        if self.kind == "nominal":
            return [f"{self.name}={v}" for v in self.values]
        return [self.name]


@dataclass
class Dataset:
    schema: list[FeatureSpec]
    X: list[tuple] | np.ndarray
    y: tuple[str, ...]
    classes: tuple[str, ...]
    encoded: bool = False

    def __post_init__(self):
        self.y = tuple(self.y)
        self.classes = tuple(self.classes)
        if len(self.X) == 0:
            raise DataError("no instances")
        if len(self.X) != len(self.y):
            raise DataError("instance and label counts differ")
        if len(self.classes) < 2:
            raise DataError("at least 2 classes are required")
        if len(set(self.classes)) != len(self.classes):
            raise DataError("duplicate class labels")
        unknown = set(self.y) - set(self.classes)
        if unknown:
            raise DataError(f"labels not in class list: {sorted(unknown)}")
        width = len(self.schema)
        if self.encoded:
            self.X = np.asarray(self.X, dtype=float)
            if self.X.ndim != 2 or self.X.shape[1] != width:
                raise DataError("encoded matrix width does not match schema")
        elif any(len(row) != width for row in self.X):
            raise DataError("instance length does not match schema")

    def __len__(self):
        return len(self.y)

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.schema]

    @property
    def targets(self) -> np.ndarray:
        """Class indices of the labels, in ``classes`` order."""
        lookup = {c: i for i, c in enumerate(self.classes)}
        return np.array([lookup[c] for c in self.y], dtype=int)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = list(indices)
        if self.encoded:
            X = self.X[idx]
        else:
            X = [self.X[i] for i in idx]
        return Dataset(self.schema, X, tuple(self.y[i] for i in idx), self.classes, self.encoded)

    def relabel(self, labels: Sequence[str]) -> "Dataset":
        return Dataset(self.schema, self.X, tuple(labels), self.classes, self.encoded)


@dataclass(frozen=True)
class SplitPlan:
    folds: tuple[tuple[int, ...], ...]
    prune_fraction: float
    seed: int

    def train_test(self, fold: int) -> tuple[list[int], list[int]]:
        test = list(self.folds[fold])
        train = sorted(i for j, f in enumerate(self.folds) if j != fold for i in f)
        return train, test


# -- loading ---------------------------------------------------------------


def _is_number(s: str) -> bool:
    try:
        return math.isfinite(float(s))
    except ValueError:
        return False


def _numeric_sort_key(s: str):
    return (0, float(s), s) if _is_number(s) else (1, 0.0, s)


def infer_feature(name: str, column: Sequence[str]) -> FeatureSpec:
    """Nominal if any value is non-numeric or a small integer code set, else real."""
    distinct = sorted(set(column), key=_numeric_sort_key)
    if not all(_is_number(v) for v in distinct):
        return FeatureSpec(name, "nominal", tuple(distinct))
    numbers = {float(v) for v in distinct}
    if numbers <= {0.0, 1.0}:
        return FeatureSpec(name, "binary")
    if all(x.is_integer() for x in numbers) and len(numbers) <= 5:
        return FeatureSpec(name, "nominal", tuple(distinct))
    return FeatureSpec(name, "real")


def load_schema(path: str | os.PathLike) -> list[FeatureSpec]:
    """Read a schema file: one ``name: kind [v1,v2,...]`` line per feature."""
    specs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise DataError(f"{path}:{lineno}: expected 'name: kind'")
            name, rest = (s.strip() for s in line.split(":", 1))
            kind, _, values = rest.partition(" ")
            if kind == "nominal":
                vals = tuple(v.strip() for v in values.strip().strip("[]").split(",") if v.strip())
                specs.append(FeatureSpec(name, "nominal", vals))
            else:
                specs.append(FeatureSpec(name, kind))
    return specs


def _read_rows(path, delimiter=","):
    if not os.path.exists(path):
        raise DataError(f"missing file: {path}")
    with open(path, newline="") as fh:
        rows = [[c.strip() for c in row] for row in csv.reader(fh, delimiter=delimiter)]
    return [r for r in rows if any(r)]


def _parse_value(spec: FeatureSpec, raw: str, where: str):
    if raw in MISSING:
        raise DataError(f"{where}: missing value for {spec.name!r}")
    if spec.kind == "nominal":
        if raw not in spec.values:
            raise DataError(f"{where}: value {raw!r} outside nominal set of {spec.name!r}")
        return raw
    if not _is_number(raw):
        raise DataError(f"{where}: non-numeric value {raw!r} in {spec.kind} column {spec.name!r}")
    x = float(raw)
    if spec.kind == "binary":
        if x not in (0.0, 1.0):
            raise DataError(f"{where}: binary column {spec.name!r} holds {raw!r}")
        return int(x)
    return x


def load_dataset(
    path,
    schema="infer",
    *,
    header: bool = False,
    class_column: int | str = -1,
    delimiter: str = ",",
    extra_paths: Sequence = (),
) -> Dataset | list[Dataset]:
    """Load a CSV file into a raw :class:`Dataset`.

    ``schema`` is ``"infer"``, a list of :class:`FeatureSpec` or a schema file
    path. With ``extra_paths`` the schema is inferred over all files jointly
    and one dataset per file is returned (first ``path``, then the extras), so
    fixed train/test files share nominal value sets.
    """
    paths = [path, *extra_paths]
    tables = [_read_rows(p, delimiter) for p in paths]
    names = None
    if header:
        names = tables[0][0]
        tables = [t[1:] for t in tables]
    if not tables[0]:
        raise DataError("no instances")
    width = len(names) if names else len(tables[0][0])
    for p, t in zip(paths, tables):
        for i, row in enumerate(t):
            if len(row) != width:
                raise DataError(f"{p}: ragged row {i + 1} has {len(row)} columns, expected {width}")
    if isinstance(class_column, str):
        if names is None or class_column not in names:
            raise DataError(f"class column {class_column!r} not found")
        cidx = names.index(class_column)
    else:
        cidx = class_column % width
    feat_idx = [j for j in range(width) if j != cidx]
    if names is None:
        names = [f"x{j}" for j in range(width)]

    if isinstance(schema, (str, os.PathLike)) and schema != "infer":
        schema = load_schema(schema)
    if schema == "infer":
        allrows = [r for t in tables for r in t]
        for r in allrows:
            for j in feat_idx:
                if r[j] in MISSING:
                    raise DataError(f"missing value in column {names[j]!r}")
        schema = [infer_feature(names[j], [r[j] for r in allrows]) for j in feat_idx]
    schema = list(schema)
    if len(schema) != len(feat_idx):
        raise DataError(f"schema lists {len(schema)} features, data has {len(feat_idx)}")

    classes = sorted({r[cidx] for t in tables for r in t}, key=_numeric_sort_key)
    out = []
    for p, t in zip(paths, tables):
        X = [
            tuple(_parse_value(s, r[j], f"{p}:{i + 1}") for s, j in zip(schema, feat_idx))
            for i, r in enumerate(t)
        ]
        out.append(Dataset(schema, X, tuple(r[cidx] for r in t), tuple(classes)))
    return out if extra_paths else out[0]


def bundled_path(name: str) -> str:
    """Absolute path of a CSV shipped in ``heretic/data``."""
    path = resources.files("heretic") / "data" / name
    if not path.is_file():
        raise DataError(f"no bundled dataset {name!r}")
    return str(path)


# -- encoding --------------------------------------------------------------


@dataclass
class Encoder:
    """Encoding fitted on one (training) dataset and reusable on others."""

    schema: list[FeatureSpec]
    warnings: list[str] = field(default_factory=list)

    @property
    def encoded_schema(self) -> list[FeatureSpec]:
        out = []
        for spec in self.schema:
            if spec.kind == "nominal":
                out += [FeatureSpec(n, "binary", group=spec.name) for n in spec.encoded_names()]
            elif spec.kind == "real":
                if spec.min is not None:
                    out.append(FeatureSpec(spec.name, "real", min=0.0, max=1.0))
            else:
                out.append(spec)
        return out

    def transform(self, ds: Dataset) -> Dataset:
        if ds.encoded:
            raise DataError("dataset is already encoded")
        if [s.name for s in ds.schema] != [s.name for s in self.schema]:
            raise DataError("dataset schema does not match the encoder")
        columns = []
        for j, spec in enumerate(self.schema):
            col = [row[j] for row in ds.X]
            if spec.kind == "nominal":
                for v in spec.values:
                    columns.append([1.0 if c == v else 0.0 for c in col])
            elif spec.kind == "real":
                if spec.min is None:
                    continue
                span = spec.max - spec.min
                columns.append([min(1.0, max(0.0, (c - spec.min) / span)) for c in col])
            else:
                columns.append([float(c) for c in col])
        X = np.array(columns, dtype=float).T.reshape(len(ds), len(columns))
        return Dataset(self.encoded_schema, X, ds.y, ds.classes, encoded=True)


def fit_encoder(ds: Dataset) -> Encoder:
    """Fit min/max statistics on ``ds``; constant real columns are dropped."""
    fitted, warnings = [], []
    for j, spec in enumerate(ds.schema):
        if spec.kind == "real":
            col = [row[j] for row in ds.X]
            lo, hi = min(col), max(col)
            if lo == hi:
                warnings.append(f"dropped constant real feature {spec.name!r}")
                spec = replace(spec, min=None, max=None)
            else:
                spec = replace(spec, min=lo, max=hi)
        fitted.append(spec)
    return Encoder(fitted, warnings)


def encode(ds: Dataset, encoder: Encoder | None = None) -> Dataset:
    """One-hot nominal features, min-max scale real ones, pass bits through."""
    return (encoder or fit_encoder(ds)).transform(ds)


# -- splitting -------------------------------------------------------------


def _class_members(labels: Sequence, indices: Sequence[int] | None = None):
    indices = range(len(labels)) if indices is None else indices
    groups: dict = {}
    for pos, i in enumerate(indices):
        groups.setdefault(labels[pos], []).append(i)
    return [groups[c] for c in sorted(groups, key=str)]


def stratified_kfold(ds: Dataset | Sequence[str], k: int, seed: int) -> SplitPlan:
    """Deal shuffled class members round-robin into ``k`` folds."""
    if k < 2:
        raise DataError("k must be at least 2")
    labels = ds.y if isinstance(ds, Dataset) else tuple(ds)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for members in _class_members(labels):
        if len(members) < k:
            raise DataError(f"class with {len(members)} instances cannot fill {k} folds")
        for i in rng.permutation(members):
            folds[pos % k].append(int(i))
            pos += 1
    return SplitPlan(tuple(tuple(sorted(f)) for f in folds), 0.0, seed)


def train_prune_split(
    indices: Sequence[int],
    fraction: float,
    seed: int,
    labels: Sequence | None = None,
) -> tuple[list[int], list[int]]:
    """Hold out ``round(fraction * N)`` indices for pruning, stratified by ``labels``."""
    if not 0.0 < fraction < 1.0:
        raise DataError("prune fraction must lie in (0, 1)")
    indices = list(indices)
    n_prune = math.floor(fraction * len(indices) + 0.5)
    groups = _class_members(labels if labels is not None else [0] * len(indices), indices)
    # largest-remainder allocation of the prune quota across classes
    quotas = [fraction * len(g) for g in groups]
    alloc = [math.floor(q) for q in quotas]
    order = sorted(range(len(groups)), key=lambda c: (-(quotas[c] - alloc[c]), c))
    for c in order[: n_prune - sum(alloc)]:
        alloc[c] += 1
    rng = np.random.default_rng(seed)
    grow, held = [], []
    for g, a in zip(groups, alloc):
        perm = [int(i) for i in rng.permutation(g)]
        held += perm[:a]
        grow += perm[a:]
    return sorted(grow), sorted(held)
