"""Empirical tree measures, total variation and chi-square tests."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import stats as _st

from ..errors import DegenerateCells
from ..forest import LabeledForest, PlanarForest, PlanarTree, shape_of

MIN_EXPECTED = 5.0
TAIL = "<tail>"


@dataclass
class EmpiricalMeasure:
    """Counts of tree shapes (keyed by text form) over ``total`` trees."""

    counts: Counter = field(default_factory=Counter)
    total: int = 0

    def __post_init__(self):
        self.counts = Counter(self.counts)
        if sum(self.counts.values()) != self.total:
            raise ValueError("counts do not add up to total")

    def proportion(self, tree: PlanarTree | str) -> float:
        key = tree if isinstance(tree, str) else tree.to_text()
        return self.counts.get(key, 0) / self.total if self.total else 0.0

    def proportions(self) -> dict[str, float]:
        return {key: c / self.total for key, c in sorted(self.counts.items())}

    def __add__(self, other: "EmpiricalMeasure") -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.counts + other.counts, self.total + other.total)


def empirical_measure(terminal: LabeledForest | PlanarForest) -> EmpiricalMeasure:
    """Count every tree shape of a terminal state."""
    shape = shape_of(terminal)
    counts = Counter(shape.tree_texts())
    return EmpiricalMeasure(counts, shape.k)


def count_tree(forest: PlanarForest, tree: PlanarTree) -> int:
    """Number of trees of ``forest`` equal to ``tree``."""
    target = np.asarray(tree.dfs_outdegrees, dtype=np.int64)
    sizes = np.asarray(forest.sizes, dtype=np.int64)
    starts = np.cumsum(sizes) - sizes
    cand = starts[sizes == len(target)]
    if cand.size == 0:
        return 0
    seq = np.asarray(forest.outdegrees, dtype=np.int64)
    block = seq[cand[:, None] + np.arange(len(target))]
    return int((block == target).all(axis=1).sum())


def tv_distance(p: Mapping, q: Mapping):
    """Half the L1 distance between two finite laws, over the union of supports."""
    keys = set(p) | set(q)
    return sum(abs(p.get(key, 0) - q.get(key, 0)) for key in keys) / 2


def normalize_counts(counts: Mapping) -> dict:
    total = sum(counts.values())
    return {key: c / total for key, c in counts.items()}


def pool_cells(expected: Mapping, total: float, min_expected: float = MIN_EXPECTED):
    """Group cells so every expected count is at least ``min_expected``.

    Returns ``(mapping key -> cell, cell expected probabilities)``.  Cells
    below the threshold, and any mass missing from ``expected``, go into one
    tail cell; a tail that is still too small joins the smallest kept cell.
    """
    items = sorted(expected.items(), key=lambda kv: repr(kv[0]))
    kept = {key: float(p) for key, p in items if float(p) * total >= min_expected}
    tail_keys = [key for key, _ in items if key not in kept]
    tail_p = max(0.0, 1.0 - sum(float(p) for _, p in items)) + sum(float(expected[key]) for key in tail_keys)
    cell_of = {key: key for key in kept}
    if tail_p * total >= min_expected or (tail_p > 0 and not kept):
        probs = dict(kept)
        probs[TAIL] = tail_p
        for key in tail_keys:
            cell_of[key] = TAIL
        target = TAIL
    elif tail_p > 0 or tail_keys:
        target = min(kept, key=lambda key: (kept[key], repr(key)))
        probs = dict(kept)
        probs[target] += tail_p
        for key in tail_keys:
            cell_of[key] = target
    else:
        probs = dict(kept)
        target = None
    return cell_of, probs, target


def chi_square_test(
    observed: Mapping,
    expected: Mapping,
    total: float | None = None,
    min_expected: float = MIN_EXPECTED,
    ddof: int = 0,
) -> tuple[float, float]:
    """Pearson goodness of fit of ``observed`` counts to an ``expected`` law.

    Cells with expected count below ``min_expected`` are pooled into a tail
    cell, which also absorbs observations outside ``expected`` and any
    missing expected mass.  Degrees of freedom: cells - 1 - ddof.
    """
    total = sum(observed.values()) if total is None else total
    cell_of, probs, tail = pool_cells(expected, total, min_expected)
    if len(probs) - ddof < 2:
        raise DegenerateCells(f"only {len(probs)} cell(s) after pooling")
    obs = dict.fromkeys(probs, 0.0)
    for key, c in observed.items():
        cell = cell_of.get(key, tail)
        if cell is None:
            # observation where the expected law has no mass at all
            return float("inf"), 0.0
        obs[cell] += c
    stat = 0.0
    for cell, p in probs.items():
        e = p * total
        if e == 0:
            if obs[cell]:
                return float("inf"), 0.0
            continue
        stat += (obs[cell] - e) ** 2 / e
    dof = len(probs) - 1 - ddof
    return float(stat), float(_st.chi2.sf(stat, dof))


def independence_test(pairs: Iterable[tuple], min_expected: float = MIN_EXPECTED) -> tuple[float, float]:
    """Chi-square test of independence between the two coordinates of ``pairs``.

    Categories of either coordinate seen fewer than ``10 * min_expected``
    times are merged into one tail category.
    """
    pairs = list(pairs)
    first = Counter(a for a, _ in pairs)
    second = Counter(b for _, b in pairs)

    def cats(counter):
        keep = sorted((key for key, c in counter.items() if c >= 10 * min_expected), key=repr)
        return {key: i for i, key in enumerate(keep)}, len(keep)

    rows, n_rows = cats(first)
    cols, n_cols = cats(second)
    table = np.zeros((n_rows + 1, n_cols + 1))
    for a, b in pairs:
        table[rows.get(a, n_rows), cols.get(b, n_cols)] += 1
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if min(table.shape) < 2:
        raise DegenerateCells("independence test needs two categories per coordinate")
    res = _st.chi2_contingency(table, correction=False)
    return float(res.statistic), float(res.pvalue)


def mean_and_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))
