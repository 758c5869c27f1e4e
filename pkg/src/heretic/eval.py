"""Accuracy, fidelity, paired t-tests and experiment reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from heretic.rules import rule_complexity

# two-sided critical values of Student's t, degrees of freedom 1..30
T_CRITICAL = {
    0.10: (6.314, 2.920, 2.353, 2.132, 2.015, 1.943, 1.895, 1.860, 1.833, 1.812,
           1.796, 1.782, 1.771, 1.761, 1.753, 1.746, 1.740, 1.734, 1.729, 1.725,
           1.721, 1.717, 1.714, 1.711, 1.708, 1.706, 1.703, 1.701, 1.699, 1.697),
    0.05: (12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
           2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
           2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042),
    0.01: (63.657, 9.925, 5.841, 4.604, 4.032, 3.707, 3.499, 3.355, 3.250, 3.169,
           3.106, 3.055, 3.012, 2.977, 2.947, 2.921, 2.898, 2.878, 2.861, 2.845,
           2.831, 2.819, 2.807, 2.797, 2.787, 2.779, 2.771, 2.763, 2.756, 2.750),
}

METHODS = ("network", "heretic", "trepan_lite", "c45")
METHOD_TITLES = {"network": "ANN", "heretic": "HERETIC", "trepan_lite": "Trepan-lite", "c45": "C4.5"}

# published reference figures for FERNN, which this package does not implement
FERNN_REFERENCE = {
    "accuracy": {"Promoters": 91.72, "Breast Cancer": 95.81, "Heart Disease": 82.23, "Vote": 94.70,
                 "Monks 1": 97.50, "Monks 2": 94.95, "Monks 3": 98.98},
    "fidelity": {"Promoters": 87.56, "Breast Cancer": 97.84, "Heart Disease": 93.45, "Vote": 97.90,
                 "Monks 1": 98.45, "Monks 2": 95.32, "Monks 3": 99.59},
}


def _check_pair(a, b):
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not len(a):
        raise ValueError("no instances to score")


def accuracy(pred: Sequence, truth: Sequence) -> float:
    _check_pair(pred, truth)
    return sum(p == t for p, t in zip(pred, truth)) / len(pred)


def fidelity(rule_pred: Sequence, net_pred: Sequence) -> float:
    """Share of instances on which the rules and the network agree."""
    _check_pair(rule_pred, net_pred)
    return sum(p == t for p, t in zip(rule_pred, net_pred)) / len(rule_pred)


def t_critical(df: int, alpha: float = 0.05) -> float:
    if alpha not in T_CRITICAL:
        raise ValueError(f"alpha must be one of {sorted(T_CRITICAL)}")
    if df < 1:
        raise ValueError("need at least one degree of freedom")
    # beyond the table the df=30 value is used, which is slightly conservative
    return T_CRITICAL[alpha][min(df, 30) - 1]


def paired_t(a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> tuple[float, bool]:
    """Two-sided paired t-test of ``a`` against ``b``.

    All-zero differences give ``(0.0, False)``; a constant nonzero shift has
    zero variance and gives ``(±inf, True)``.
    """
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    if len(a) < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    n = len(d)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    scale = max(1.0, float(np.abs(d).max()))
    if sd <= 1e-12 * scale:
        if abs(mean) <= 1e-12 * scale:
            return 0.0, False
        return math.copysign(math.inf, mean), True
    t = mean / (sd / math.sqrt(n))
    return t, abs(t) > t_critical(n - 1, alpha)


@dataclass
class RunRecord:
    """Scores of one fold of one repeat.

    ``accuracy`` maps method name to test accuracy; ``fidelity`` maps the
    rule methods to agreement with the network on the test rows.
    """

    dataset: str
    repeat: int
    fold: int
    seed: int
    accuracy: dict[str, float]
    fidelity: dict[str, float] = field(default_factory=dict)
    classes: int = 0
    terms: int = 0
    literals: int = 0
    timings: dict[str, float] = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        for kind in (self.accuracy, self.fidelity):
            for m, v in kind.items():
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{m} score {v} outside [0, 1]")
        if any(t < 0 for t in self.timings.values()):
            raise ValueError("negative timing")

    def to_dict(self, timings: bool = False) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("timings")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)


@dataclass
class Summary:
    mean: float
    std: float
    runs: list[float]


def _summary(values: list[float]) -> Summary:
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return Summary(float(arr.mean()), std, [float(v) for v in values])


def _per_repeat(records: list[RunRecord], kind: str, method: str) -> list[float]:
    """Mean score over the folds of each repeat, in repeat order."""
    by_repeat: dict[int, list[float]] = {}
    for r in records:
        scores = getattr(r, kind)
        if method in scores:
            by_repeat.setdefault(r.repeat, []).append(scores[method])
    return [float(np.mean(by_repeat[k])) for k in sorted(by_repeat)]


@dataclass
class Report:
    """Per-dataset, per-method mean and standard deviation across repeats."""

    records: list[RunRecord]
    config: dict = field(default_factory=dict)
    alpha: float = 0.05

    @property
    def datasets(self) -> list[str]:
        seen: list[str] = []
        for r in self.records:
            if r.dataset not in seen:
                seen.append(r.dataset)
        return seen

    def _of(self, dataset):
        return [r for r in self.records if r.dataset == dataset]

    def methods(self, dataset: str, kind: str = "accuracy") -> list[str]:
        present = {m for r in self._of(dataset) for m in getattr(r, kind)}
        return [m for m in METHODS if m in present]

    def summary(self, dataset: str, kind: str, method: str) -> Summary:
        return _summary(_per_repeat(self._of(dataset), kind, method))

    def comparisons(self, dataset: str) -> list[dict]:
        """Paired t-tests of HERETIC accuracy against every other method."""
        recs = self._of(dataset)
        base = _per_repeat(recs, "accuracy", "heretic")
        out = []
        for m in self.methods(dataset):
            if m == "heretic":
                continue
            other = _per_repeat(recs, "accuracy", m)
            if len(base) < 2 or len(other) != len(base):
                out.append({"versus": m, "t": None, "significant": None})
                continue
            t, sig = paired_t(base, other, self.alpha)
            out.append({"versus": m, "t": t, "significant": sig})
        return out

    def rule_size(self, dataset: str) -> dict:
        recs = self._of(dataset)
        return {
            "terms": _summary([r.terms for r in recs]).__dict__,
            "literals": _summary([r.literals for r in recs]).__dict__,
        }

    def to_dict(self) -> dict:
        out = {"config": self.config, "alpha": self.alpha, "datasets": {}}
        for ds in self.datasets:
            entry = {}
            for kind in ("accuracy", "fidelity"):
                entry[kind] = {
                    m: {"mean": s.mean, "std": s.std, "runs": s.runs}
                    for m in self.methods(ds, kind)
                    for s in [self.summary(ds, kind, m)]
                }
            entry["paired_t"] = [
                {**c, "t": _json_float(c["t"])} for c in self.comparisons(ds)
            ]
            entry["rule_size"] = self.rule_size(ds)
            out["datasets"][ds] = entry
        out["records"] = [r.to_dict() for r in self.records]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls([RunRecord.from_dict(r) for r in d["records"]], d.get("config", {}), d.get("alpha", 0.05))

    def to_text(self) -> str:
        return render_text(self)


def _json_float(x):
    if x is None or math.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf"


def _table(title: str, header: list[str], rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]

    def line(cells):
        return "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths)))

    rule = "-" * len(line(header))
    return [title, rule, line(header), rule, *[line(r) for r in rows], rule]


def render_text(report: Report) -> str:
    """Aligned tables: methods as rows, datasets as mean/std column pairs (percent)."""
    out: list[str] = []
    datasets = report.datasets
    for kind, title in (("accuracy", "ACCURACY (%)"), ("fidelity", "FIDELITY TO THE NETWORK (%)")):
        header = ["Method"]
        for ds in datasets:
            header += [f"{ds} mean", "std"]
        methods = [m for m in METHODS if any(m in report.methods(ds, kind) for ds in datasets)]
        rows = []
        for m in methods:
            row = [METHOD_TITLES[m]]
            for ds in datasets:
                if m in report.methods(ds, kind):
                    s = report.summary(ds, kind, m)
                    row += [f"{100 * s.mean:.2f}", f"{100 * s.std:.3f}"]
                else:
                    row += ["-", "-"]
            rows.append(row)
        out += _table(title, header, rows) + [""]
    out.append(f"Paired t-test of HERETIC accuracy, two-sided, alpha={report.alpha}")
    for ds in datasets:
        for c in report.comparisons(ds):
            if c["t"] is None:
                verdict = "n/a (needs >= 2 repeats)"
            else:
                verdict = f"t={c['t']:+.3f} {'significant' if c['significant'] else 'not significant'}"
            out.append(f"  {ds}: vs {METHOD_TITLES[c['versus']]}: {verdict}")
    out.append("")
    out.append("Rule size (mean over runs)")
    for ds in datasets:
        rs = report.rule_size(ds)
        out.append(f"  {ds}: {rs['terms']['mean']:.1f} terms, {rs['literals']['mean']:.1f} literals")
    out.append("")
    out.append("Reference only, not computed here (FERNN, published figures, %):")
    for kind in ("accuracy", "fidelity"):
        vals = ", ".join(f"{k} {v:.2f}" for k, v in FERNN_REFERENCE[kind].items())
        out.append(f"  {kind}: {vals}")
    out.append("Trepan-lite is a single tree fitted to network labels, not full Trepan.")
    return "\n".join(out) + "\n"


__all__ = [
    "Report",
    "RunRecord",
    "accuracy",
    "fidelity",
    "paired_t",
    "render_text",
    "rule_complexity",
    "t_critical",
]
