"""Plane trees, plane forests and reproduction laws.

A plane tree is stored as its depth-first list of outdegrees.  This keeps
validity checks, hashing and equality linear in the size, and it is the
encoding every other module works with.  Child lists are derived on demand.

Text formats used throughout the package:

* forests: ``"(1,2,1,0,0|1,0)"``, one parenthesized group per tree;
* laws: ``"0:0.5,2:0.5"`` or, in rational mode, ``"0:1/2,2:1/2"``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidLaw, InvalidSequence, NotNormalized, ParseError

FLOAT_TOL = 1e-12
PARSE_TOL = 1e-9


# ---------------------------------------------------------------------------
# reproduction laws


@dataclass(frozen=True)
class ReproductionLaw:
    """A finitely supported law on the nonnegative integers.

    Probabilities are either all :class:`fractions.Fraction` (``exact`` mode)
    or all ``float``; the two are never mixed inside one law.
    """

    values: tuple[int, ...]
    probs: tuple

    def __post_init__(self):
        if len(self.values) != len(self.probs):
            raise InvalidLaw("values and probs differ in length")
        kept = [(int(v), p) for v, p in zip(self.values, self.probs) if p != 0]
        if not kept:
            raise InvalidLaw("law has empty support")
        kinds = {isinstance(p, Fraction) for _, p in kept}
        if len(kinds) != 1:
            raise InvalidLaw("cannot mix exact and floating point probabilities")
        exact = kinds.pop()
        if not exact:
            kept = [(v, float(p)) for v, p in kept]
        for v, p in kept:
            if v < 0:
                raise InvalidLaw(f"negative support value {v}")
            if p < 0 or (not exact and not math.isfinite(p)):
                raise InvalidLaw(f"invalid probability {p!r} at value {v}")
        vals = [v for v, _ in kept]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise InvalidLaw("support values must be strictly increasing")
        total = sum(p for _, p in kept)
        if exact:
            if total != 1:
                raise NotNormalized(f"probabilities sum to {total}, not 1")
        elif abs(total - 1.0) > FLOAT_TOL:
            raise NotNormalized(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "values", tuple(vals))
        object.__setattr__(self, "probs", tuple(p for _, p in kept))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, object]) -> "ReproductionLaw":
        items = sorted(mapping.items())
        return cls(tuple(v for v, _ in items), tuple(p for _, p in items))

    @classmethod
    def delta(cls, value: int, exact: bool = True) -> "ReproductionLaw":
        return cls((value,), (Fraction(1) if exact else 1.0,))

    @property
    def exact(self) -> bool:
        return isinstance(self.probs[0], Fraction)

    @property
    def support(self) -> tuple[int, ...]:
        return self.values

    @property
    def max_value(self) -> int:
        return self.values[-1]

    @cached_property
    def _pmf(self) -> dict:
        return dict(zip(self.values, self.probs))

    def pmf(self, value: int):
        return self._pmf.get(value, Fraction(0) if self.exact else 0.0)

    def __call__(self, value: int):
        return self.pmf(value)

    def as_dict(self) -> dict:
        return dict(self._pmf)

    @cached_property
    def mean(self):
        return sum(v * p for v, p in zip(self.values, self.probs))

    @property
    def criticality(self) -> str:
        if self.mean < 1:
            return "subcritical"
        if self.mean > 1:
            return "supercritical"
        return "critical"

    def to_float(self) -> "ReproductionLaw":
        if not self.exact:
            return self
        probs = [float(p) for p in self.probs]
        total = math.fsum(probs)
        return ReproductionLaw(self.values, tuple(p / total for p in probs))

    @cached_property
    def sampling_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Support and cumulative probabilities for inverse-CDF sampling."""
        values = np.asarray(self.values, dtype=np.int64)
        cdf = np.cumsum([float(p) for p in self.probs])
        cdf[-1] = 1.0
        return values, cdf

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        values, cdf = self.sampling_arrays
        if len(values) == 1:
            return np.full(size, values[0], dtype=np.int64)
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return values[idx]

    def to_text(self) -> str:
        return ",".join(f"{v}:{p}" if self.exact else f"{v}:{p!r}" for v, p in zip(self.values, self.probs))

    def __str__(self):
        return self.to_text()


_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?(/\d+)?$")


def parse_law(text: str, exact: bool = False) -> ReproductionLaw:
    """Parse ``"v:p,v:p,..."`` into a law.

    In float mode a sum within ``PARSE_TOL`` of one is renormalized; in exact
    mode the sum must equal one exactly.
    """
    if not text or not text.strip():
        raise ParseError("empty law specification", 0)
    entries: dict[int, object] = {}
    pos = 0
    for chunk in text.split(","):
        start = pos
        pos += len(chunk) + 1
        item = chunk.strip()
        if ":" not in item:
            raise ParseError(f"expected 'value:probability', got {item!r}", start)
        v_txt, p_txt = (s.strip() for s in item.split(":", 1))
        if not v_txt.isdigit():
            raise ParseError(f"support value must be a nonnegative integer, got {v_txt!r}", start)
        if not _NUMBER.match(p_txt):
            raise ParseError(f"bad probability {p_txt!r}", start + chunk.index(":") + 1)
        v = int(v_txt)
        if v in entries:
            raise ParseError(f"duplicate support value {v}", start)
        try:
            p = Fraction(p_txt)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"bad probability {p_txt!r}", start) from exc
        if p < 0:
            raise ParseError(f"negative probability {p_txt!r}", start)
        entries[v] = p if exact else float(p)
    total = sum(entries.values())
    if exact:
        if total != 1:
            raise NotNormalized(f"probabilities sum to {total}, not 1")
    else:
        if abs(total - 1.0) > PARSE_TOL:
            raise NotNormalized(f"probabilities sum to {total!r}, not 1")
        entries = {v: p / total for v, p in entries.items()}
    return ReproductionLaw.from_mapping(entries)


# ---------------------------------------------------------------------------
# Lukasiewicz walks


@dataclass(frozen=True)
class LukasiewiczWalk:
    """Partial sums of ``outdegree - 1`` steps, starting from zero."""

    steps: tuple[int, ...]

    @classmethod
    def from_outdegrees(cls, outdegrees: Iterable[int]) -> "LukasiewiczWalk":
        return cls(tuple(int(y) - 1 for y in outdegrees))

    def __post_init__(self):
        for i, s in enumerate(self.steps):
            if s < -1:
                raise InvalidSequence(f"step {s} < -1 at index {i + 1}", i + 1)

    @cached_property
    def partial_sums(self) -> tuple[int, ...]:
        sums = [0]
        for s in self.steps:
            sums.append(sums[-1] + s)
        return tuple(sums)

    def first_passage(self, level: int) -> int | None:
        """Smallest ``l >= 1`` with ``S_l == -level``, or None."""
        target = -level
        for i, s in enumerate(self.partial_sums[1:], start=1):
            if s == target:
                return i
        return None


# ---------------------------------------------------------------------------
# plane trees and forests


def _check_tree(seq: Sequence[int]) -> None:
    if not seq:
        raise InvalidSequence("a tree has at least one vertex", 0)
    level = 0
    last = len(seq) - 1
    for i, y in enumerate(seq):
        if y < 0:
            raise InvalidSequence(f"negative outdegree {y} at index {i + 1}", i + 1)
        level += y - 1
        if level < 0 and i != last:
            raise InvalidSequence(f"walk reaches -1 at index {i + 1} before the end ({len(seq)})", i + 1)
    if level != -1:
        raise InvalidSequence(f"walk ends at {level}, expected -1", len(seq))


@dataclass(frozen=True)
class PlanarTree:
    """Rooted plane tree given by its depth-first outdegree sequence."""

    dfs_outdegrees: tuple[int, ...]

    def __post_init__(self):
        seq = tuple(int(y) for y in self.dfs_outdegrees)
        _check_tree(seq)
        object.__setattr__(self, "dfs_outdegrees", seq)

    @classmethod
    def _trusted(cls, seq: tuple[int, ...]) -> "PlanarTree":
        obj = object.__new__(cls)
        object.__setattr__(obj, "dfs_outdegrees", seq)
        return obj

    @classmethod
    def from_text(cls, text: str) -> "PlanarTree":
        forest = parse_forest_text(text)
        if forest.k != 1:
            raise InvalidSequence(f"expected a single tree, got {forest.k}")
        return forest.trees[0]

    @property
    def size(self) -> int:
        return len(self.dfs_outdegrees)

    def __len__(self):
        return self.size

    def children(self) -> list[list[int]]:
        """Child positions (depth-first indices) of every vertex, left to right."""
        kids: list[list[int]] = [[] for _ in self.dfs_outdegrees]
        stack: list[int] = []
        for i, y in enumerate(self.dfs_outdegrees):
            if stack:
                parent = stack[-1]
                kids[parent].append(i)
                if len(kids[parent]) == self.dfs_outdegrees[parent]:
                    stack.pop()
            if y:
                stack.append(i)
        return kids

    def height(self) -> int:
        depth = [0] * self.size
        for i, kids in enumerate(self.children()):
            for c in kids:
                depth[c] = depth[i] + 1
        return max(depth)

    def to_text(self) -> str:
        return "(" + ",".join(map(str, self.dfs_outdegrees)) + ")"

    def __str__(self):
        return self.to_text()


class PlanarForest:
    """Ordered sequence of plane trees.

    Stored flat, as the concatenated outdegree listing plus tree sizes; the
    :class:`PlanarTree` objects are built on first access to ``trees``.
    Instances are immutable value objects.
    """

    __slots__ = ("_outdegrees", "_sizes", "_trees")

    def __init__(self, trees: Iterable[PlanarTree]):
        trees = tuple(trees)
        if not trees:
            raise InvalidSequence("a forest has at least one tree")
        for t in trees:
            if not isinstance(t, PlanarTree):
                raise TypeError(f"expected PlanarTree, got {type(t).__name__}")
        out: list[int] = []
        for t in trees:
            out.extend(t.dfs_outdegrees)
        _init = object.__setattr__
        _init(self, "_trees", trees)
        _init(self, "_outdegrees", tuple(out))
        _init(self, "_sizes", tuple(t.size for t in trees))

    @classmethod
    def _trusted(cls, outdegrees: tuple[int, ...], sizes: tuple[int, ...]) -> "PlanarForest":
        """Wrap an already validated flat listing without re-checking it."""
        obj = cls.__new__(cls)
        object.__setattr__(obj, "_trees", None)
        object.__setattr__(obj, "_outdegrees", outdegrees)
        object.__setattr__(obj, "_sizes", sizes)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("PlanarForest is immutable")

    @property
    def trees(self) -> tuple[PlanarTree, ...]:
        if self._trees is None:
            trees = []
            start = 0
            for size in self._sizes:
                trees.append(PlanarTree._trusted(self._outdegrees[start : start + size]))
                start += size
            object.__setattr__(self, "_trees", tuple(trees))
        return self._trees

    @property
    def k(self) -> int:
        return len(self._sizes)

    @property
    def n(self) -> int:
        return len(self._outdegrees)

    @property
    def sizes(self) -> tuple[int, ...]:
        return self._sizes

    @property
    def outdegrees(self) -> tuple[int, ...]:
        return self._outdegrees

    def tree_texts(self) -> list[str]:
        """Text form of every tree, without building tree objects."""
        out = []
        start = 0
        seq = self._outdegrees
        for size in self._sizes:
            out.append("(" + ",".join(map(str, seq[start : start + size])) + ")")
            start += size
        return out

    def walk(self) -> LukasiewiczWalk:
        return LukasiewiczWalk.from_outdegrees(self._outdegrees)

    def to_text(self) -> str:
        return "(" + "|".join(t[1:-1] for t in self.tree_texts()) + ")"

    def __eq__(self, other):
        if not isinstance(other, PlanarForest):
            return NotImplemented
        return self._sizes == other._sizes and self._outdegrees == other._outdegrees

    def __hash__(self):
        return hash((self._sizes, self._outdegrees))

    def __repr__(self):
        return f"PlanarForest({self.to_text()!r})"

    def __str__(self):
        return self.to_text()

    def __reduce__(self):
        return (PlanarForest._trusted, (self._outdegrees, self._sizes))


def parse_forest(outdegrees: Sequence[int], k: int) -> PlanarForest:
    """Split a depth-first outdegree listing into ``k`` plane trees.

    Trees end at the successive first passages of the walk to -1, ..., -k;
    the passage to -k must happen exactly at the last index.
    """
    seq = [int(y) for y in outdegrees]
    if k < 1:
        raise InvalidSequence(f"tree count must be positive, got {k}")
    if not seq:
        raise InvalidSequence("empty outdegree sequence", 0)
    trees = []
    level = 0
    start = 0
    last = len(seq) - 1
    for i, y in enumerate(seq):
        if y < 0:
            raise InvalidSequence(f"negative outdegree {y} at index {i + 1}", i + 1)
        level += y - 1
        if level == -len(trees) - 1:
            if len(trees) + 1 == k and i != last:
                raise InvalidSequence(
                    f"walk first reaches -{k} at index {i + 1}, before the final index {len(seq)}", i + 1
                )
            trees.append(PlanarTree(tuple(seq[start : i + 1])))
            start = i + 1
    if len(trees) != k:
        raise InvalidSequence(
            f"walk ends at level {level}; sequence encodes {len(trees)} complete trees, not {k}", len(seq)
        )
    return PlanarForest(tuple(trees))


def _split_groups(text: str) -> list[list[int]]:
    compact = "".join(text.split())
    if len(compact) < 2 or compact[0] != "(" or compact[-1] != ")":
        raise ParseError(f"expected a parenthesized outdegree list, got {text!r}", 0)
    groups = []
    for g in compact[1:-1].split("|"):
        if not g:
            raise ParseError("empty tree in forest text", None)
        try:
            groups.append([int(tok) for tok in g.split(",")])
        except ValueError as exc:
            raise ParseError(f"non-integer outdegree in {g!r}") from exc
    return groups


def parse_forest_text(text: str) -> PlanarForest:
    """Parse ``"(1,2,1,0,0|1,0)"``; every group must be one complete tree."""
    return PlanarForest(tuple(parse_forest(g, 1).trees[0] for g in _split_groups(text)))


def parse_tree_text(text: str) -> PlanarTree:
    groups = _split_groups(text)
    if len(groups) != 1:
        raise InvalidSequence(f"expected a single tree, got {len(groups)} groups")
    return parse_forest(groups[0], 1).trees[0]


# ---------------------------------------------------------------------------
# labeled forests


@dataclass(frozen=True)
class LabeledForest:
    """Plane forest with vertex labels 1..n and edge labels 1..n-k.

    ``vertex_labels[p]`` is the label of the vertex at depth-first position
    ``p`` (over the concatenated forest).  ``edge_labels`` lists, in the same
    order but skipping roots, the label of the edge entering each vertex.
    """

    shape: PlanarForest
    vertex_labels: tuple[int, ...]
    edge_labels: tuple[int, ...]
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vertex_labels", tuple(self.vertex_labels))
        object.__setattr__(self, "edge_labels", tuple(self.edge_labels))
        if not self.check:
            return
        n, k = self.shape.n, self.shape.k
        if sorted(self.vertex_labels) != list(range(1, n + 1)):
            raise InvalidSequence("vertex labels are not a bijection onto 1..n")
        if sorted(self.edge_labels) != list(range(1, n - k + 1)):
            raise InvalidSequence("edge labels are not a bijection onto 1..n-k")

    @property
    def n(self) -> int:
        return self.shape.n

    @property
    def k(self) -> int:
        return self.shape.k

    def root_positions(self) -> list[int]:
        pos, out = 0, []
        for t in self.shape.trees:
            out.append(pos)
            pos += t.size
        return out

    def outdegree_of(self) -> dict[int, int]:
        """Map vertex label -> outdegree."""
        return dict(zip(self.vertex_labels, self.shape.outdegrees))

    def edges(self) -> list[tuple[int, int, int, int]]:
        """``(parent label, child label, edge label, slot)`` for every edge.

        ``slot`` is the 1-based left-to-right position of the child.
        """
        parent_of: dict[int, tuple[int, int]] = {}
        offset = 0
        for t in self.shape.trees:
            for parent, kids in enumerate(t.children()):
                for slot, c in enumerate(kids, start=1):
                    parent_of[offset + c] = (offset + parent, slot)
            offset += t.size
        out = []
        # edge labels follow the depth-first order of the child vertex
        for pos, label in zip(sorted(parent_of), self.edge_labels):
            parent, slot = parent_of[pos]
            out.append((self.vertex_labels[parent], self.vertex_labels[pos], label, slot))
        return sorted(out)

    def root_labels(self) -> tuple[int, ...]:
        return tuple(self.vertex_labels[p] for p in self.root_positions())

    def relabel(self, vertex_perm: Mapping[int, int], edge_perm: Mapping[int, int]) -> "LabeledForest":
        return LabeledForest(
            self.shape,
            tuple(vertex_perm[v] for v in self.vertex_labels),
            tuple(edge_perm[e] for e in self.edge_labels),
        )

    def to_text(self) -> str:
        return (
            f"{self.shape.to_text()};v={','.join(map(str, self.vertex_labels))}"
            f";e={','.join(map(str, self.edge_labels))}"
        )

    def __str__(self):
        return self.to_text()

    @classmethod
    def from_text(cls, text: str) -> "LabeledForest":
        parts = "".join(text.split()).split(";")
        if len(parts) != 3 or not parts[1].startswith("v=") or not parts[2].startswith("e="):
            raise ParseError(f"expected '<forest>;v=...;e=...', got {text!r}", 0)

        def ints(s):
            return tuple(int(x) for x in s.split(",")) if s else ()

        return cls(parse_forest_text(parts[0]), ints(parts[1][2:]), ints(parts[2][2:]))


def shape_of(forest: LabeledForest | PlanarForest) -> PlanarForest:
    """Drop vertex and edge labels, keeping the left-to-right order."""
    if isinstance(forest, PlanarForest):
        return forest
    return forest.shape


# ---------------------------------------------------------------------------
# Galton-Watson probabilities


def tree_probability(law: ReproductionLaw, tree: PlanarTree | PlanarForest):
    """Galton-Watson probability of a plane tree, the product of ``law(y)``.

    Forests multiply over their trees.  Exact whenever ``law`` is exact.
    """
    seq = tree.outdegrees if isinstance(tree, PlanarForest) else tree.dfs_outdegrees
    prob = Fraction(1) if law.exact else 1.0
    for y in seq:
        p = law.pmf(y)
        if not p:
            return p
        prob *= p
    return prob
