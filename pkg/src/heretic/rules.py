"""Propositional rules: literals, conjunctive terms, DNF and class rulesets.

A term is a frozenset of :class:`Literal`. Terms are normalized by
:func:`conjoin`, which returns ``None`` for contradictions (``v=0`` with
``v=1``, or an empty threshold interval) and keeps only the tightest bound of
each kind per real feature. The empty term is TRUE; an empty DNF is FALSE.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from heretic.tree import BINARY, DecisionTree

MAX_TERMS = 100_000


class TermExplosionError(RuntimeError):
    pass


class SubstitutionError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Literal:
    """``var = value`` for bits (value 0 or 1), ``var <= value`` or ``var > value`` for reals."""

    var: str
    op: str = "="
    value: float = 1

    def __post_init__(self):
        if self.op not in ("=", "<=", ">"):
            raise ValueError(f"unknown relation {self.op!r}")
        if self.op == "=" and self.value not in (0, 1):
            raise ValueError("binary literals take the value 0 or 1")

    @property
    def is_threshold(self) -> bool:
        return self.op != "="

    def negate(self) -> "Literal":
        if self.op == "=":
            return Literal(self.var, "=", 1 - self.value)
        return Literal(self.var, ">" if self.op == "<=" else "<=", self.value)

    def holds(self, column: np.ndarray) -> np.ndarray:
        if self.op == "=":
            return column > 0.5 if self.value == 1 else column <= 0.5
        if self.op == "<=":
            return column <= self.value
        return column > self.value

    def __str__(self):
        if self.op != "=":
            return f"{self.var} {self.op} {self.value:.6g}"
        if "=" in self.var:
            # one-hot column such as "color=red"
            return self.var if self.value == 1 else self.var.replace("=", "!=", 1)
        return f"{self.var}={int(self.value)}"


Term = frozenset


def conjoin(*parts: Iterable[Literal]) -> Term | None:
    """Conjunction of literal collections, or ``None`` if contradictory."""
    bits: dict[str, int] = {}
    upper: dict[str, float] = {}
    lower: dict[str, float] = {}
    for part in parts:
        for lit in part:
            if lit.op == "=":
                if bits.setdefault(lit.var, lit.value) != lit.value:
                    return None
            elif lit.op == "<=":
                upper[lit.var] = min(upper.get(lit.var, lit.value), lit.value)
            else:
                lower[lit.var] = max(lower.get(lit.var, lit.value), lit.value)
    for var, hi in upper.items():
        if var in lower and lower[var] >= hi:
            return None
    lits = [Literal(v, "=", b) for v, b in bits.items()]
    lits += [Literal(v, "<=", t) for v, t in upper.items()]
    lits += [Literal(v, ">", t) for v, t in lower.items()]
    return frozenset(lits)


def term_key(term: Term):
    return (len(term), sorted(term))


def term_text(term: Term) -> str:
    return " AND ".join(str(l) for l in sorted(term)) if term else "TRUE"


def absorb(terms: Iterable[Term]) -> list[Term]:
    """Drop duplicate terms and terms that contain another term's literals."""
    ordered = sorted(set(terms), key=term_key)
    if not ordered or not ordered[0]:
        return ordered[:1]
    bit: dict[Literal, int] = {}
    masks = []
    for t in ordered:
        m = 0
        for lit in t:
            m |= 1 << bit.setdefault(lit, len(bit))
        masks.append(m)
    # shorter terms come first, so only kept terms can absorb later ones
    if len(ordered) < PACKED_ABSORB:
        kept: list[int] = []
        out = []
        for t, m in zip(ordered, masks):
            if not any(k & m == k for k in kept):
                kept.append(m)
                out.append(t)
        return out
    width = (len(bit) + 63) // 64
    rows = np.array(
        [[(m >> (64 * w)) & 0xFFFFFFFFFFFFFFFF for w in range(width)] for m in masks], dtype=np.uint64
    )
    kept_rows = np.empty_like(rows)
    n_kept = 0
    out = []
    for t, row in zip(ordered, rows):
        if n_kept and not ((kept_rows[:n_kept] & ~row).any(axis=1)).all():
            continue
        kept_rows[n_kept] = row
        n_kept += 1
        out.append(t)
    return out


PACKED_ABSORB = 128


@dataclass(frozen=True)
class DNF:
    terms: tuple[Term, ...]
    consequent: str = ""

    @classmethod
    def of(cls, terms: Iterable, consequent: str = "") -> "DNF":
        normal = {conjoin(t) for t in terms}
        normal.discard(None)
        return cls(tuple(sorted(normal, key=term_key)), consequent)

    @property
    def is_true(self) -> bool:
        return any(len(t) == 0 for t in self.terms)

    @property
    def is_false(self) -> bool:
        return not self.terms

    @property
    def variables(self) -> set[str]:
        return {l.var for t in self.terms for l in t}

    @property
    def n_literals(self) -> int:
        return sum(len(t) for t in self.terms)

    def evaluate(self, X, input_names: Sequence[str]) -> np.ndarray:
        """Boolean vector: does any term hold on each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        col = {n: i for i, n in enumerate(input_names)}
        missing = self.variables - col.keys()
        if missing:
            raise KeyError(f"unknown feature symbol(s): {sorted(missing)}")
        fired = np.zeros(len(X), dtype=bool)
        for term in self.terms:
            ok = np.ones(len(X), dtype=bool)
            for lit in term:
                ok &= lit.holds(X[:, col[lit.var]])
            fired |= ok
        return fired

    def holds(self, assignment: Mapping[str, float]) -> bool:
        return any(all(bool(l.holds(np.array([assignment[l.var]]))[0]) for l in t) for t in self.terms)

    def __str__(self):
        if not self.terms:
            return "FALSE"
        body = " OR ".join(f"({term_text(t)})" if len(t) > 1 else term_text(t) for t in self.terms)
        return f"{body} THEN {self.consequent}" if self.consequent else body


def tree_to_dnf(t: DecisionTree, symbol: str = "") -> tuple[DNF, ...]:
    """One DNF per tree outcome; every root-to-leaf path becomes one term."""
    by_outcome: list[list[Term]] = [[] for _ in t.labels]
    for tests, leaf in t.paths():
        lits = []
        for f, thr, right in tests:
            name = t.input_names[f]
            if t.kinds[f] == BINARY:
                lits.append(Literal(name, "=", 1 if right else 0))
            else:
                lits.append(Literal(name, ">" if right else "<=", thr))
        by_outcome[leaf.outcome].append(conjoin(lits))
    return tuple(
        DNF.of(terms, f"{symbol}={label}" if symbol else str(label))
        for terms, label in zip(by_outcome, t.labels)
    )


def _substitute_once(dnf: DNF, rules: Mapping[str, tuple[DNF, DNF]], limit: int) -> list[Term]:
    out: set[Term] = set()
    for term in dnf.terms:
        partial: list[Term] = [frozenset(l for l in term if l.var not in rules)]
        for lit in sorted(l for l in term if l.var in rules):
            options = rules[lit.var][int(lit.value)].terms
            grown = {conjoin(p, o) for p in partial for o in options}
            grown.discard(None)
            partial = absorb(grown)
            if len(partial) > limit:
                raise TermExplosionError(
                    f"substitution exceeded {limit} terms; use smaller networks or stronger pruning"
                )
        out.update(partial)
        if len(out) > limit:
            raise TermExplosionError(
                f"substitution exceeded {limit} terms; use smaller networks or stronger pruning"
            )
    return absorb(out)


def substitute_dnf(dnf: DNF, rules: Mapping[str, tuple[DNF, DNF]], limit: int = MAX_TERMS) -> tuple[DNF, int]:
    """Replace neuron literals by their rules until none remain.

    ``rules`` maps a neuron symbol to its (bit-0 DNF, bit-1 DNF). A literal
    ``X=1`` becomes X's bit-1 DNF and ``X=0`` its bit-0 DNF. Returns the
    substituted DNF and the number of rounds performed.
    """
    _check_acyclic(rules)
    rounds = 0
    while dnf.variables & rules.keys():
        dnf = DNF(tuple(_substitute_once(dnf, rules, limit)), dnf.consequent)
        dnf = DNF.of(dnf.terms, dnf.consequent)
        rounds += 1
    return dnf, rounds


def _check_acyclic(rules: Mapping[str, tuple[DNF, DNF]]):
    deps = {s: set().union(*(d.variables for d in pair)) & rules.keys() for s, pair in rules.items()}
    state: dict[str, int] = {}

    def visit(s, stack):
        if state.get(s) == 2:
            return
        if state.get(s) == 1:
            raise SubstitutionError(f"cyclic neuron references: {' -> '.join(stack + [s])}")
        state[s] = 1
        for d in sorted(deps[s]):
            visit(d, stack + [s])
        state[s] = 2

    for s in sorted(deps):
        visit(s, [])


@dataclass
class Ruleset:
    """Per-class DNFs over input literals with a conflict policy.

    When several class rules fire the earliest class in ``priority`` wins;
    when none fires the ``default`` class is predicted.
    """

    rules: dict[str, DNF]
    default: str
    priority: list[str]
    input_names: list[str]
    rounds: int = 0
    support: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.default not in self.rules:
            raise ValueError("default class has no rule entry")
        if sorted(self.priority) != sorted(self.rules):
            raise ValueError("priority must order exactly the ruleset classes")

    @property
    def classes(self) -> list[str]:
        return list(self.rules)

    def fired(self, X) -> np.ndarray:
        """Boolean matrix (rows x classes) of which class rules hold."""
        return np.column_stack([self.rules[c].evaluate(X, self.input_names) for c in self.classes])

    def to_text(self) -> str:
        lines = []
        for c in self.priority:
            lines.append(f"# class {c}")
            dnf = self.rules[c]
            if dnf.is_false:
                lines.append(f"# (no rule fires {c})")
            for term in dnf.terms:
                lines.append(f"IF {term_text(term)} THEN {c}")
        lines.append(f"DEFAULT {self.default}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        def lit(l):
            return [l.var, l.op, l.value]

        return {
            "classes": self.classes,
            "default": self.default,
            "priority": list(self.priority),
            "input_names": list(self.input_names),
            "rounds": self.rounds,
            "support": dict(self.support),
            "rules": {c: [[lit(l) for l in sorted(t)] for t in d.terms] for c, d in self.rules.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Ruleset":
        rules = {
            c: DNF.of([[Literal(v, op, val) for v, op, val in t] for t in terms], c)
            for c, terms in data["rules"].items()
        }
        return cls(
            rules, data["default"], list(data["priority"]), list(data["input_names"]),
            data.get("rounds", 0), dict(data.get("support", {})),
        )


def resolve(fired: np.ndarray, classes: Sequence[str], priority: Sequence[str], default: str) -> list[str]:
    """Class per row from a fired matrix using the priority/default policy."""
    order = [list(classes).index(c) for c in priority]
    out = []
    for row in np.atleast_2d(fired):
        winner = next((classes[i] for i in order if row[i]), default)
        out.append(winner)
    return out


def ruleset_predict(r: Ruleset, x):
    """Predicted class for one encoded instance, or a list for a matrix."""
    single = np.ndim(x) == 1
    labels = resolve(r.fired(np.atleast_2d(x)), r.classes, r.priority, r.default)
    return labels[0] if single else labels


def substitute(
    neuron_rules: Mapping[str, tuple[DNF, DNF]],
    outputs: Mapping[str, str],
    input_names: Sequence[str],
    limit: int = MAX_TERMS,
) -> Ruleset:
    """Build class rules from output-unit rules by recursive substitution.

    ``outputs`` maps each class label to its output-unit symbol; the class
    rule starts from that unit's bit-1 DNF. Priority and default are the
    class order until :func:`rank_by_support` is applied.
    """
    rules, rounds = {}, 0
    hidden = {s: pair for s, pair in neuron_rules.items() if s not in outputs.values()}
    for label, symbol in outputs.items():
        dnf, n = substitute_dnf(neuron_rules[symbol][1], hidden, limit)
        rules[label] = DNF(dnf.terms, label)
        rounds = max(rounds, n)
    classes = list(outputs)
    return Ruleset(rules, classes[0], classes, list(input_names), rounds)


def rank_by_support(r: Ruleset, X, default: str | None = None) -> Ruleset:
    """Order classes by the total number of rows of ``X`` their terms cover.

    A row covered by two terms of one class counts twice. Ties keep class order.
    """
    support = {}
    for c in r.classes:
        dnf = r.rules[c]
        support[c] = sum(int(DNF((t,)).evaluate(X, r.input_names).sum()) for t in dnf.terms)
    priority = sorted(r.classes, key=lambda c: (-support[c], r.classes.index(c)))
    return Ruleset(r.rules, default or r.default, priority, r.input_names, r.rounds, support)


def rule_complexity(r: Ruleset) -> tuple[int, int, int]:
    """(classes, terms, literals) summed over all class rules."""
    terms = sum(len(d.terms) for d in r.rules.values())
    lits = sum(d.n_literals for d in r.rules.values())
    return len(r.rules), terms, lits
