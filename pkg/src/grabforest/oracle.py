"""Exhaustive exact computations on small instances.

Everything here uses :class:`fractions.Fraction`; there are no floats in
this module.  Outcomes are keyed by their canonical text form.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping

from .errors import Infeasible, InvalidArms, TooLarge
from .forest import LabeledForest, PlanarForest, PlanarTree, ReproductionLaw, parse_forest
from .gw import first_passage_pmf, walk_pmf

TERMINAL_BOUND = 6
CONDITIONAL_BOUND = 10
TREE_BOUND = 12


@dataclass(frozen=True)
class ExactLaw:
    """Finite law with exact rational masses, keyed by text form."""

    outcomes: Mapping[str, Fraction]

    def __post_init__(self):
        clean = {}
        for key, p in self.outcomes.items():
            if not isinstance(p, Fraction):
                raise TypeError(f"mass of {key!r} is not a Fraction")
            if p < 0:
                raise ValueError(f"negative mass at {key!r}")
            if p:
                clean[key] = clean.get(key, Fraction(0)) + p
        object.__setattr__(self, "outcomes", dict(sorted(clean.items())))

    @classmethod
    def uniform(cls, keys: Iterable[str]) -> "ExactLaw":
        keys = list(keys)
        if len(set(keys)) != len(keys):
            raise ValueError("uniform law over a list with repeated outcomes")
        return cls({key: Fraction(1, len(keys)) for key in keys})

    def total(self) -> Fraction:
        return sum(self.outcomes.values(), Fraction(0))

    def __len__(self):
        return len(self.outcomes)

    def __getitem__(self, key: str) -> Fraction:
        return self.outcomes.get(key, Fraction(0))

    def support(self) -> list[str]:
        return list(self.outcomes)

    def is_uniform(self) -> bool:
        return len(set(self.outcomes.values())) == 1 and self.total() == 1

    def map(self, fn: Callable[[str], str]) -> "ExactLaw":
        out: dict[str, Fraction] = {}
        for key, p in self.outcomes.items():
            image = fn(key)
            out[image] = out.get(image, Fraction(0)) + p
        return ExactLaw(out)

    def shape_marginal(self) -> "ExactLaw":
        """Forget labels of labeled-forest outcomes."""
        return self.map(lambda key: key.split(";", 1)[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["outcome", "numerator", "denominator"])
        for key, p in self.outcomes.items():
            writer.writerow([key, p.numerator, p.denominator])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExactLaw":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls({r["outcome"]: Fraction(int(r["numerator"]), int(r["denominator"])) for r in rows})


def _as_counts(arms) -> tuple[int, ...]:
    counts = tuple(getattr(arms, "counts", arms))
    n = len(counts)
    if n < 2 or min(counts) < 0 or sum(counts) > n - 1:
        raise InvalidArms(f"invalid arm vector {counts}")
    return counts


def _check_bound(n: int, bound: int) -> None:
    if n > bound:
        raise TooLarge(f"n = {n} exceeds the exhaustive bound {bound}")


# ---------------------------------------------------------------------------
# expansion of the grabbing dynamics


def _labeled_text(counts, root_order, edges) -> str:
    """Text form of a terminal state given as ``(label, parent, slot, child)`` edges."""
    child = {(p, s): (c, lab) for lab, p, s, c in edges}
    groups, vlabels, elabels = [], [], []
    for root in root_order:
        seq = []
        stack = [(root, None)]
        while stack:
            v, lab = stack.pop()
            seq.append(counts[v - 1])
            vlabels.append(v)
            if lab is not None:
                elabels.append(lab)
            for s in range(counts[v - 1], 0, -1):
                stack.append(child[(v, s)])
        groups.append(",".join(map(str, seq)))
    return f"({'|'.join(groups)});v={','.join(map(str, vlabels))};e={','.join(map(str, elabels))}"


def _cluster_root(v: int, edges) -> int:
    parent = {c: p for _, p, _, c in edges}
    while v in parent:
        v = parent[v]
    return v


def _expand(counts, start_states: dict) -> dict:
    """Push a distribution over states through every activation.

    A state is ``(roots, inactive arms, edges)``; ``roots`` is a tuple in
    axis order, or a frozenset when the axis order is factored out.
    """
    states = start_states
    total = sum(counts)
    for label in range(1, total + 1):
        nxt: dict = {}
        for (roots, inactive, edges), p in states.items():
            p_arm = p / len(inactive)
            eligible_count = len(roots) - 1
            for arm in inactive:
                own = _cluster_root(arm[0], edges)
                rest = inactive - {arm}
                p_grab = p_arm / eligible_count
                for g in roots:
                    if g == own:
                        continue
                    if isinstance(roots, frozenset):
                        new_roots = roots - {g}
                    else:
                        new_roots = tuple(r for r in roots if r != g)
                    key = (new_roots, rest, edges + ((label, arm[0], arm[1], g),))
                    nxt[key] = nxt.get(key, Fraction(0)) + p_grab
        states = nxt
    return states


def exact_terminal_law(arms, bound: int = TERMINAL_BOUND) -> ExactLaw:
    """Exact law of the labeled terminal state, by full expansion.

    Branches over every initial axis order, every arm firing order and every
    grab, merging identical intermediate states.
    """
    counts = _as_counts(arms)
    n = len(counts)
    _check_bound(n, bound)
    arms_all = frozenset((p, s) for p in range(1, n + 1) for s in range(1, counts[p - 1] + 1))
    p0 = Fraction(1, math.factorial(n))
    start = {(perm, arms_all, ()): p0 for perm in itertools.permutations(range(1, n + 1))}
    final = _expand(counts, start)
    out: dict[str, Fraction] = {}
    for (roots, _, edges), p in final.items():
        key = _labeled_text(counts, roots, edges)
        out[key] = out.get(key, Fraction(0)) + p
    return ExactLaw(out)


@lru_cache(maxsize=None)
def _terminal_shape_law_sorted(counts: tuple[int, ...]) -> ExactLaw:
    n = len(counts)
    arms_all = frozenset((p, s) for p in range(1, n + 1) for s in range(1, counts[p - 1] + 1))
    final = _expand(counts, {(frozenset(range(1, n + 1)), arms_all, ()): Fraction(1)})
    out: dict[str, Fraction] = {}
    for (roots, _, edges), p in final.items():
        orders = list(itertools.permutations(sorted(roots)))
        q = p / len(orders)
        for order in orders:
            key = _labeled_text(counts, order, edges).split(";", 1)[0]
            out[key] = out.get(key, Fraction(0)) + q
    return ExactLaw(out)


def exact_terminal_shape_law(arms, bound: int = 7) -> ExactLaw:
    """Shape marginal of :func:`exact_terminal_law`, with the axis order factored out.

    The dynamics never look at the axis order, so the surviving roots end up
    in a uniform order independent of everything else.  Relabeling particles
    does not change shapes, so the result only depends on the sorted counts.
    """
    counts = _as_counts(arms)
    _check_bound(len(counts), bound)
    return _terminal_shape_law_sorted(tuple(sorted(counts)))


# ---------------------------------------------------------------------------
# enumeration of forests


def _forest_sequences(n: int, k: int, values: Iterable[int], descending: bool = False) -> Iterator[tuple[int, ...]]:
    """All outdegree sequences over ``values`` encoding a ``k``-tree forest on ``n`` vertices."""
    vals = sorted(set(values), reverse=descending)
    seq: list[int] = []

    def rec(level: int):
        i = len(seq)
        if i == n:
            if level == -k:
                yield tuple(seq)
            return
        remaining = n - i
        for v in vals:
            new = level + v - 1
            if new <= -k and i != n - 1:
                continue
            # each remaining vertex lowers the walk by at most one
            if new - (remaining - 1) > -k:
                continue
            seq.append(v)
            yield from rec(new)
            seq.pop()

    yield from rec(0)


def _multiset_forest_sequences(counts: tuple[int, ...], k: int) -> Iterator[tuple[int, ...]]:
    n = len(counts)
    pool = Counter(counts)
    seq: list[int] = []

    def rec(level: int):
        i = len(seq)
        if i == n:
            if level == -k:
                yield tuple(seq)
            return
        for v in sorted(pool):
            if not pool[v]:
                continue
            new = level + v - 1
            if new <= -k and i != n - 1:
                continue
            pool[v] -= 1
            seq.append(v)
            yield from rec(new)
            seq.pop()
            pool[v] += 1

    yield from rec(0)


def enumerate_phi(arms, bound: int = TERMINAL_BOUND) -> list[LabeledForest]:
    """Every labeled plane forest whose vertex ``i`` has outdegree ``x_i``."""
    counts = _as_counts(arms)
    n = len(counts)
    _check_bound(n, bound)
    k = n - sum(counts)
    particles_by_degree: dict[int, list[int]] = {}
    for i, x in enumerate(counts, start=1):
        particles_by_degree.setdefault(x, []).append(i)
    out = []
    for seq in _multiset_forest_sequences(counts, k):
        shape = parse_forest(seq, k)
        roots = set(itertools.accumulate((0,) + shape.sizes[:-1]))
        non_roots = [p for p in range(n) if p not in roots]
        positions_by_degree: dict[int, list[int]] = {}
        for p, y in enumerate(seq):
            positions_by_degree.setdefault(y, []).append(p)
        degrees = sorted(positions_by_degree)
        per_degree = [list(itertools.permutations(particles_by_degree[d])) for d in degrees]
        for choice in itertools.product(*per_degree):
            vlabels = [0] * n
            for d, perm in zip(degrees, choice):
                for p, label in zip(positions_by_degree[d], perm):
                    vlabels[p] = label
            for elabels in itertools.permutations(range(1, len(non_roots) + 1)):
                out.append(LabeledForest(shape, tuple(vlabels), elabels))
    return out


def phi_cardinality(arms) -> int:
    """``|Phi(x)|`` without listing it: shapes times label choices."""
    counts = _as_counts(arms)
    k = len(counts) - sum(counts)
    shapes = sum(1 for _ in _multiset_forest_sequences(counts, k))
    labelings = math.prod(math.factorial(c) for c in Counter(counts).values())
    return shapes * labelings * math.factorial(sum(counts))


def enumerate_forests(n: int, k: int, values: Iterable[int] | None = None) -> list[PlanarForest]:
    """All plane forests with ``k`` trees and ``n`` vertices (outdegrees restricted to ``values``)."""
    values = range(n) if values is None else values
    return [parse_forest(seq, k) for seq in _forest_sequences(n, k, values)]


def enumerate_trees(max_size: int) -> list[PlanarTree]:
    """All plane trees with at most ``max_size`` vertices.

    Ordered by size, then by decreasing depth-first outdegree sequence.
    """
    if max_size > TREE_BOUND:
        raise TooLarge(f"max_size = {max_size} exceeds {TREE_BOUND}")
    out = []
    for size in range(1, max_size + 1):
        out.extend(PlanarTree(seq) for seq in _forest_sequences(size, 1, range(size), descending=True))
    return out


# ---------------------------------------------------------------------------
# conditioned Galton-Watson law


def _require_exact(law: ReproductionLaw) -> None:
    if not law.exact:
        raise TypeError("exact oracles need a law with Fraction probabilities")


def exact_conditional_gw(law: ReproductionLaw, k: int, n: int, bound: int = CONDITIONAL_BOUND) -> ExactLaw:
    """Galton-Watson forest with ``k`` trees conditioned on ``n`` vertices.

    Each forest gets ``prod law(y_i)`` divided by ``P(T_k = n)`` from
    Kemperman's formula.
    """
    _require_exact(law)
    _check_bound(n, bound)
    z = first_passage_pmf(law, k, n)
    if z == 0:
        raise Infeasible(f"P(T_{k} = {n}) = 0 under {law}")
    out = {}
    for seq in _forest_sequences(n, k, law.values):
        weight = Fraction(1)
        for y in seq:
            weight *= law.pmf(y)
        out[parse_forest(seq, k).to_text()] = weight / z
    return ExactLaw(out)


def enumerated_normalizer(law: ReproductionLaw, k: int, n: int) -> Fraction:
    """``P(T_k = n)`` as the total weight of all forests in ``F_{n,k}``."""
    _require_exact(law)
    total = Fraction(0)
    for seq in _forest_sequences(n, k, law.values):
        weight = Fraction(1)
        for y in seq:
            weight *= law.pmf(y)
        total += weight
    return total


def _multisets(n: int, total: int, values: list[int]) -> Iterator[tuple[int, ...]]:
    """Sorted ``n``-tuples over ``values`` summing to ``total``."""
    if n == 0:
        if total == 0:
            yield ()
        return
    for i, v in enumerate(values):
        if v * n > total:
            break
        for rest in _multisets(n - 1, total - v, values[i:]):
            yield (v,) + rest


def mixture_terminal_shape_law(law: ReproductionLaw, k: int, n: int, bound: int = 7) -> ExactLaw:
    """Shape law of the terminal state when the arms are i.i.d. ``law`` given ``sum = n - k``.

    Mixes the exact terminal shape laws of every arm vector.
    """
    _require_exact(law)
    _check_bound(n, bound)
    total = n - k
    p_total = walk_pmf(law, n).get(total, Fraction(0))
    if p_total == 0:
        raise Infeasible(f"P(S_{n} = {total}) = 0 under {law}")
    out: dict[str, Fraction] = {}
    for ms in _multisets(n, total, sorted(law.values)):
        weight = Fraction(1)
        for x in ms:
            weight *= law.pmf(x)
        arrangements = math.factorial(n)
        for c in Counter(ms).values():
            arrangements //= math.factorial(c)
        mass = weight * arrangements / p_total
        for key, p in _terminal_shape_law_sorted(ms).outcomes.items():
            out[key] = out.get(key, Fraction(0)) + mass * p
    return ExactLaw(out)
