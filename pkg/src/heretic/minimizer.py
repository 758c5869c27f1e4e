"""Two-level minimization of DNF rules over a Boolean atom space.

Binary variables map to one atom each; every distinct ``(feature, threshold)``
pair of a real feature becomes the atom ``feature <= threshold``. Assignments
that violate a one-hot block (not exactly one member set) or a threshold chain
(``f <= a`` true but ``f <= b`` false for ``a < b``) cannot occur and are
treated as don't-cares.

Cubes are ``(pos, neg)`` pairs of integer bitmasks over the atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from heretic.rules import DNF, Literal, Term, conjoin

EXACT_MAX_ATOMS = 16
EXACT_MAX_TERMS = 1024
EXHAUSTIVE_MAX_ATOMS = 20
SAMPLES = 100_000
COVER_NODE_BUDGET = 50_000

Cube = tuple[int, int]


class MinimizerError(ValueError):
    pass


def _popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass
class BooleanSpace:
    """Atoms plus the exclusivity structure between them.

    An atom is ``("bit", var)`` or ``("thr", var, threshold)``.
    ``onehot`` lists groups of atom indices of which exactly one is true.
    """

    atoms: list[tuple]
    onehot: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        self.atoms = [tuple(a) for a in self.atoms]
        if len(set(self.atoms)) != len(self.atoms):
            raise MinimizerError("duplicate atoms")
        self.index = {a: i for i, a in enumerate(self.atoms)}
        by_var: dict[str, list[tuple[float, int]]] = {}
        for i, a in enumerate(self.atoms):
            if a[0] == "thr":
                by_var.setdefault(a[1], []).append((a[2], i))
        self.chains = [[i for _, i in sorted(v)] for _, v in sorted(by_var.items())]
        self.dc = self._dont_care_cover()

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def names(self) -> list[str]:
        return [a[1] if a[0] == "bit" else f"{a[1]}<={a[2]:.6g}" for a in self.atoms]

    @classmethod
    def for_dnfs(cls, dnfs: Iterable[DNF], groups: Mapping[str, Sequence[str]] | None = None) -> "BooleanSpace":
        """Space over the literals of ``dnfs``.

        ``groups`` maps a group name to its one-hot member variables; any
        group with a member in use joins the space completely.
        """
        used_bits: set[str] = set()
        thresholds: set[tuple[str, float]] = set()
        for d in dnfs:
            for t in d.terms:
                for lit in t:
                    if lit.op == "=":
                        used_bits.add(lit.var)
                    else:
                        thresholds.add((lit.var, float(lit.value)))
        onehot_vars: list[list[str]] = []
        for _, members in sorted((groups or {}).items()):
            if used_bits & set(members):
                onehot_vars.append(list(members))
                used_bits |= set(members)
        atoms = [("bit", v) for v in sorted(used_bits)]
        atoms += [("thr", v, t) for v, t in sorted(thresholds)]
        index = {a: i for i, a in enumerate(atoms)}
        onehot = [[index[("bit", v)] for v in members] for members in onehot_vars]
        return cls(atoms, onehot)

    @classmethod
    def from_schema(cls, schema, dnfs: Iterable[DNF] = ()) -> "BooleanSpace":
        """Space whose one-hot blocks come from an encoded feature schema."""
        groups: dict[str, list[str]] = {}
        for spec in schema:
            if getattr(spec, "group", None):
                groups.setdefault(spec.group, []).append(spec.name)
        return cls.for_dnfs(list(dnfs), groups)

    def _dont_care_cover(self) -> list[Cube]:
        cubes = []
        for g in self.onehot:
            neg = 0
            for i in g:
                neg |= 1 << i
            cubes.append((0, neg))
            for a in range(len(g)):
                for b in range(a + 1, len(g)):
                    cubes.append(((1 << g[a]) | (1 << g[b]), 0))
        for chain in self.chains:
            for lo, hi in zip(chain, chain[1:]):
                cubes.append((1 << lo, 1 << hi))
        return cubes

    # -- conversions ------------------------------------------------------

    def literal_atom(self, lit: Literal) -> tuple[int, int]:
        key = ("bit", lit.var) if lit.op == "=" else ("thr", lit.var, float(lit.value))
        if key not in self.index:
            raise MinimizerError(f"literal {lit} is outside the Boolean space")
        positive = lit.value == 1 if lit.op == "=" else lit.op == "<="
        return self.index[key], int(positive)

    def cube(self, term: Term) -> Cube | None:
        pos = neg = 0
        for lit in term:
            i, positive = self.literal_atom(lit)
            if positive:
                pos |= 1 << i
            else:
                neg |= 1 << i
        if pos & neg:
            return None
        return pos, neg

    def cubes(self, d: DNF) -> list[Cube]:
        out = [self.cube(t) for t in d.terms]
        return [c for c in out if c is not None]

    def term(self, cube: Cube) -> Term:
        pos, neg = cube
        lits = []
        for i, a in enumerate(self.atoms):
            bit = 1 << i
            if not (pos | neg) & bit:
                continue
            positive = bool(pos & bit)
            if a[0] == "bit":
                lits.append(Literal(a[1], "=", 1 if positive else 0))
            else:
                lits.append(Literal(a[1], "<=" if positive else ">", a[2]))
        return conjoin(lits)

    def dnf(self, cubes: Iterable[Cube], consequent: str = "") -> DNF:
        return DNF.of([self.term(c) for c in cubes], consequent)

    # -- assignments --------------------------------------------------------

    def all_assignments(self) -> np.ndarray:
        return np.arange(1 << self.n, dtype=np.int64)

    def valid(self, A: np.ndarray) -> np.ndarray:
        return ~_cover_holds(self.dc, A)

    def sample_valid(self, count: int, seed: int = 0) -> np.ndarray:
        """Boolean matrix (count x atoms) of random assignments that respect exclusivity."""
        rng = np.random.default_rng(seed)
        bits = rng.integers(0, 2, size=(count, self.n)).astype(bool)
        for g in self.onehot:
            pick = rng.integers(0, len(g), size=count)
            for pos, i in enumerate(g):
                bits[:, i] = pick == pos
        for chain in self.chains:
            cut = rng.integers(0, len(chain) + 1, size=count)
            for pos, i in enumerate(chain):
                bits[:, i] = pos >= cut
        return bits

    def describe(self, assignment) -> dict[str, int]:
        if np.ndim(assignment):
            return {name: int(b) for name, b in zip(self.names, assignment)}
        return {name: (int(assignment) >> i) & 1 for i, name in enumerate(self.names)}


def _cover_holds(cubes: Sequence[Cube], A: np.ndarray) -> np.ndarray:
    """Rows of ``A`` inside the union of ``cubes``.

    ``A`` is either a vector of integer assignments or a boolean matrix.
    """
    out = np.zeros(len(A), dtype=bool)
    if A.ndim == 2:
        for pos, neg in cubes:
            p = [i for i in range(A.shape[1]) if pos >> i & 1]
            q = [i for i in range(A.shape[1]) if neg >> i & 1]
            out |= A[:, p].all(axis=1) & ~A[:, q].any(axis=1)
        return out
    for pos, neg in cubes:
        out |= ((A & pos) == pos) & ((A & neg) == 0)
    return out


# -- cube algebra ----------------------------------------------------------


def _contains(big: Cube, small: Cube) -> bool:
    """Every minterm of ``small`` lies in ``big``."""
    return (big[0] & ~small[0]) == 0 and (big[1] & ~small[1]) == 0


def _consensus(a: Cube, b: Cube) -> Cube | None:
    clash = (a[0] & b[1]) | (a[1] & b[0])
    if clash == 0 or clash & (clash - 1):
        return None
    return (a[0] | b[0]) & ~clash, (a[1] | b[1]) & ~clash


def _cofactor(cubes: Iterable[Cube], by: Cube) -> list[Cube]:
    out = []
    for pos, neg in cubes:
        if pos & by[1] or neg & by[0]:
            continue
        out.append((pos & ~by[0], neg & ~by[1]))
    return out


def _implied(cube: Cube, cover: list[Cube], budget: "_Budget | None" = None) -> bool:
    """Is ``cube`` contained in the union of ``cover`` (within the search budget)."""
    if any(_contains(c, cube) for c in cover):
        return True
    if budget is not None and budget.left <= 0:
        return False
    rest = _cofactor(cover, cube)
    if not rest:
        return False
    n = max((p | q).bit_length() for p, q in rest)
    P = np.array([[(p >> i) & 1 for i in range(n)] for p, _ in rest], dtype=bool).reshape(len(rest), n)
    N = np.array([[(q >> i) & 1 for i in range(n)] for _, q in rest], dtype=bool).reshape(len(rest), n)
    return _budgeted_tautology(P, N, budget)


def _words(x: int, width: int) -> np.ndarray:
    return np.array([(x >> (64 * k)) & 0xFFFFFFFFFFFFFFFF for k in range(width)], dtype=np.uint64)


PACK_MIN = 256


class _CubeTable:
    """Cubes packed into 64-bit words so containment and intersection
    filters run over the whole cover at once.

    Tables smaller than ``PACK_MIN`` rows are scanned in plain Python.
    """

    def __init__(self, cubes: Sequence[Cube], n_atoms: int, budget: "_Budget | None" = None):
        self.cubes = list(cubes)
        self.budget = budget
        self.packed = len(self.cubes) >= PACK_MIN
        self.width = max(1, (n_atoms + 63) // 64)
        self.pos = np.zeros((len(self.cubes) if self.packed else 0, self.width), dtype=np.uint64)
        self.neg = np.zeros_like(self.pos)
        self.alive = np.ones(len(self.cubes), dtype=bool)
        for i, c in enumerate(self.cubes):
            self.set(i, c)

    def set(self, i: int, cube: Cube):
        self.cubes[i] = cube
        if not self.packed:
            return
        self.pos[i] = _words(cube[0], self.width)
        self.neg[i] = _words(cube[1], self.width)

    def drop(self, i: int):
        self.alive[i] = False

    def _rows(self, skip):
        rows = self.alive.copy()
        if skip is not None:
            rows[skip] = False
        return rows

    def _live(self, skip):
        return [c for i, c in enumerate(self.cubes) if self.alive[i] and i != skip]

    def contains(self, cube: Cube, skip=None) -> bool:
        if not self.packed:
            return any(_contains(c, cube) for c in self._live(skip))
        p, n = _words(cube[0], self.width), _words(cube[1], self.width)
        inside = ~((self.pos & ~p) | (self.neg & ~n)).any(axis=1)
        return bool((inside & self._rows(skip)).any())

    def implied(self, cube: Cube, skip=None) -> bool:
        """Is ``cube`` inside the union of the live rows (other than ``skip``)."""
        if not self.packed:
            return _implied(cube, self._live(skip), self.budget)
        if self.contains(cube, skip):
            return True
        if self.budget is not None and self.budget.left <= 0:
            return False
        p, n = _words(cube[0], self.width), _words(cube[1], self.width)
        meets = ~((self.pos & n) | (self.neg & p)).any(axis=1) & self._rows(skip)
        P, N = _unpack(self.pos[meets]), _unpack(self.neg[meets])
        fixed = _unpack((p | n)[None, :])[0]
        P[:, fixed] = False
        N[:, fixed] = False
        return _budgeted_tautology(P, N, self.budget)


def _unpack(words: np.ndarray) -> np.ndarray:
    """Rows of 64-bit words as boolean matrices, least significant bit first."""
    return np.unpackbits(words.view(np.uint8), axis=1, bitorder="little").astype(bool)


# split nodes allowed for one containment check and for one heuristic run
TAUTOLOGY_BUDGET = 400
HEURISTIC_BUDGET = 100_000


class _Budget:
    def __init__(self, total: int):
        self.left = total


def _budgeted_tautology(P: np.ndarray, N: np.ndarray, budget: _Budget | None = None) -> bool:
    allowed = TAUTOLOGY_BUDGET if budget is None else min(TAUTOLOGY_BUDGET, budget.left)
    counter = [allowed]
    try:
        return _tautology_matrix(P, N, counter)
    except _OutOfBudget:
        # answering "no" only keeps a literal or term that could have gone
        return False
    finally:
        if budget is not None:
            budget.left -= allowed - max(counter[0], 0)


class _OutOfBudget(Exception):
    pass


def _tautology_matrix(P: np.ndarray, N: np.ndarray, budget: list[int]) -> bool:
    """Tautology check on a cover given as positive/negative literal matrices.

    ``budget`` counts the split nodes still allowed; running out raises.
    """
    budget[0] -= 1
    if budget[0] < 0:
        raise _OutOfBudget
    while True:
        if not len(P):
            return False
        size = P.sum(axis=1) + N.sum(axis=1)
        if (size == 0).any():
            return True
        # the cubes hold fewer minterms than the whole space
        if np.ldexp(1.0, -size).sum() < 1.0 - 1e-9:
            return False
        has_p, has_n = P.any(axis=0), N.any(axis=0)
        unate_p, unate_n = has_p & ~has_n, has_n & ~has_p
        if not (unate_p.any() or unate_n.any()):
            break
        # f is a tautology iff its cofactor on the weak side of a unate
        # variable is, and that cofactor drops every cube using it
        keep = ~(P[:, unate_p].any(axis=1) | N[:, unate_n].any(axis=1))
        P, N = P[keep], N[keep]
    counts = P.sum(axis=0) + N.sum(axis=0)
    j = int(np.argmax(counts))
    hi = ~N[:, j]
    Ph, Nh = P[hi], N[hi]
    Ph[:, j] = False
    if not _tautology_matrix(Ph, Nh, budget):
        return False
    lo = ~P[:, j]
    Pl, Nl = P[lo], N[lo]
    Nl[:, j] = False
    return _tautology_matrix(Pl, Nl, budget)


def _absorb_cubes(cubes: Iterable[Cube], n_atoms: int | None = None) -> list[Cube]:
    ordered = sorted(set(cubes), key=lambda c: (_popcount(c[0] | c[1]), c))
    if n_atoms is None:
        n_atoms = max((max(p | n, 1).bit_length() for p, n in ordered), default=1)
    table = _CubeTable(ordered, n_atoms)
    table.alive[:] = False
    kept: list[Cube] = []
    for i, c in enumerate(ordered):
        if not table.contains(c):
            kept.append(c)
            table.alive[i] = True
    return kept


def prime_implicants(cover: Iterable[Cube]) -> list[Cube]:
    """All primes of the function given by ``cover`` (iterated consensus)."""
    primes = set(_absorb_cubes(cover))
    queue = sorted(primes)
    while queue:
        c = queue.pop()
        if c not in primes:
            continue
        for d in sorted(primes):
            if d not in primes or c not in primes:
                continue
            new = _consensus(c, d)
            if new is None or any(_contains(e, new) for e in primes):
                continue
            primes = {e for e in primes if not _contains(new, e)}
            primes.add(new)
            queue.append(new)
    return sorted(primes, key=lambda c: (_popcount(c[0] | c[1]), c))


# -- covering --------------------------------------------------------------


def _min_cover(masks: list[int], costs: list[int], universe: int) -> list[int]:
    """Minimum (count, literal cost) set of masks covering ``universe``.

    Branch and bound on the least-covered element, with a node budget; the
    greedy cover seeds the incumbent and is returned if the budget runs out.
    """
    greedy = _greedy_cover(masks, costs, universe)
    best = [(len(greedy), sum(costs[i] for i in greedy)), greedy]
    covering: dict[int, list[int]] = {}
    u = universe
    while u:
        bit = u & -u
        u ^= bit
        covering[bit] = sorted(
            (i for i, m in enumerate(masks) if m & bit),
            key=lambda i: (-_popcount(masks[i] & universe), costs[i], i),
        )
    largest = max((_popcount(m) for m in masks), default=1) or 1
    nodes = [0]

    def search(uncovered, chosen, cost):
        if nodes[0] > COVER_NODE_BUDGET:
            return
        nodes[0] += 1
        if not uncovered:
            key = (len(chosen), cost)
            if key < best[0]:
                best[0], best[1] = key, list(chosen)
            return
        need = -(-_popcount(uncovered) // largest)
        if (len(chosen) + need, cost) >= best[0] and len(chosen) + need >= best[0][0]:
            if len(chosen) + need > best[0][0] or cost >= best[0][1]:
                return
        # branch on the uncovered element with the fewest candidate primes
        pivot, options = None, None
        u = uncovered
        while u:
            bit = u & -u
            u ^= bit
            opts = covering[bit]
            if options is None or len(opts) < len(options):
                pivot, options = bit, opts
        for i in options:
            search(uncovered & ~masks[i], chosen + [i], cost + costs[i])

    search(universe, [], 0)
    return sorted(best[1])


def _greedy_cover(masks: list[int], costs: list[int], universe: int) -> list[int]:
    chosen, uncovered = [], universe
    while uncovered:
        i = max(
            range(len(masks)),
            key=lambda j: (_popcount(masks[j] & uncovered), -costs[j], -j),
        )
        if not masks[i] & uncovered:
            raise MinimizerError("cover does not exist")
        chosen.append(i)
        uncovered &= ~masks[i]
    # drop members made redundant by later picks
    for i in sorted(chosen, key=lambda j: (-costs[j], -j)):
        rest = 0
        for j in chosen:
            if j != i:
                rest |= masks[j]
        if (universe & ~rest) == 0:
            chosen.remove(i)
    return sorted(chosen)


def _exact(cubes: list[Cube], space: BooleanSpace) -> list[Cube]:
    A = space.all_assignments()
    on = _cover_holds(cubes, A) & space.valid(A)
    on_idx = A[on]
    if not len(on_idx):
        return []
    primes = prime_implicants(cubes + space.dc)
    masks, useful = [], []
    for p in primes:
        hit = ((on_idx & p[0]) == p[0]) & ((on_idx & p[1]) == 0)
        if hit.any():
            m = 0
            for k in np.nonzero(hit)[0]:
                m |= 1 << int(k)
            masks.append(m)
            useful.append(p)
    universe = (1 << len(on_idx)) - 1
    costs = [_popcount(p[0] | p[1]) for p in useful]
    return [useful[i] for i in _min_cover(masks, costs, universe)]


def _heuristic(cubes: list[Cube], space: BooleanSpace) -> list[Cube]:
    """Literal elimination and irredundant cover to a fixpoint.

    Containment checks share a node budget; once it is spent they fall
    back to single-cube containment, which keeps the result sound.
    """
    dc = space.dc
    budget = _Budget(HEURISTIC_BUDGET)
    dc_table = _CubeTable(dc, space.n, budget)
    cover = [c for c in _absorb_cubes(cubes, space.n) if not dc_table.implied(c)]
    changed = True
    while changed:
        changed = False
        cover = sorted(cover, key=lambda c: (-_popcount(c[0] | c[1]), c))
        # literal elimination: enlarge each cube while it stays inside f + dc
        table = _CubeTable(cover + dc, space.n, budget)
        for k in range(len(cover)):
            pos, neg = cover[k]
            bits = pos | neg
            while bits:
                bit = bits & -bits
                bits ^= bit
                trial = (pos & ~bit, neg & ~bit)
                if table.implied(trial):
                    pos, neg = trial
                    table.set(k, trial)
                    changed = True
            cover[k] = (pos, neg)
        absorbed = _absorb_cubes(cover, space.n)
        changed |= len(absorbed) != len(cover)
        cover = sorted(absorbed, key=lambda c: (_popcount(c[0] | c[1]), c))
        # irredundant: drop cubes covered by the others together with dc
        table = _CubeTable(cover + dc, space.n, budget)
        for k in reversed(range(len(cover))):
            if table.implied(cover[k], skip=k):
                table.drop(k)
                changed = True
        cover = [c for k, c in enumerate(cover) if table.alive[k]]
    return cover


def _size(d: DNF) -> tuple[int, int]:
    return len(d.terms), d.n_literals


def minimize(d: DNF, space: BooleanSpace | None = None, mode: str = "auto") -> DNF:
    """Equivalent DNF (over the valid assignments of ``space``) with fewer terms/literals.

    ``exact`` computes all primes and a minimum cover; it is limited to
    16 atoms and 1024 terms. ``heuristic`` eliminates literals and redundant
    terms to a fixpoint. ``auto`` picks exact whenever the limits allow.
    """
    if mode not in ("auto", "exact", "heuristic"):
        raise MinimizerError(f"unknown mode {mode!r}")
    space = space or BooleanSpace.for_dnfs([d])
    small = space.n <= EXACT_MAX_ATOMS and len(d.terms) <= EXACT_MAX_TERMS
    if mode == "exact" and not small:
        raise MinimizerError(
            f"exact mode is limited to {EXACT_MAX_ATOMS} atoms and {EXACT_MAX_TERMS} terms "
            f"(got {space.n} atoms, {len(d.terms)} terms)"
        )
    cubes = space.cubes(d)
    if mode == "exact" or (mode == "auto" and small):
        result = space.dnf(_exact(cubes, space), d.consequent)
    else:
        result = space.dnf(_heuristic(cubes, space), d.consequent)
    original = DNF.of(d.terms, d.consequent)
    return result if _size(result) <= _size(original) else original


@dataclass
class Equivalence:
    equal: bool
    sampled: bool = False
    witness: dict | None = None
    checked: int = 0

    def __bool__(self):
        return self.equal


def equivalent(d1: DNF, d2: DNF, space: BooleanSpace | None = None, seed: int = 0) -> Equivalence:
    """Compare two DNFs on every valid assignment (or a seeded sample of them)."""
    space = space or BooleanSpace.for_dnfs([d1, d2])
    c1, c2 = space.cubes(d1), space.cubes(d2)
    if space.n <= EXHAUSTIVE_MAX_ATOMS:
        A = space.all_assignments()
        A = A[space.valid(A)]
        sampled = False
    else:
        A = space.sample_valid(SAMPLES, seed)
        sampled = True
    diff = np.nonzero(_cover_holds(c1, A) != _cover_holds(c2, A))[0]
    if len(diff):
        return Equivalence(False, sampled, space.describe(A[diff[0]]), len(A))
    return Equivalence(True, sampled, None, len(A))


def to_pla(d: DNF, space: BooleanSpace) -> str:
    """Espresso PLA text: the cover as ON-set rows, invalid regions as don't-cares."""

    def row(c):
        pos, neg = c
        return "".join("1" if pos >> i & 1 else "0" if neg >> i & 1 else "-" for i in range(space.n))

    cubes = space.cubes(d)
    lines = [
        f".i {space.n}",
        ".o 1",
        ".ilb " + " ".join(n.replace(" ", "_") for n in space.names),
        f".ob {(d.consequent or 'f').replace(' ', '_')}",
        ".type fd",
        f".p {len(cubes) + len(space.dc)}",
    ]
    lines += [f"{row(c)} 1" for c in cubes]
    lines += [f"{row(c)} -" for c in space.dc]
    lines.append(".e")
    return "\n".join(lines) + "\n"


__all__ = [
    "BooleanSpace",
    "Equivalence",
    "MinimizerError",
    "equivalent",
    "minimize",
    "prime_implicants",
    "to_pla",
]

