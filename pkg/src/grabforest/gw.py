"""Galton-Watson trees and forests, Lukasiewicz-walk dynamic programming,
the cycle lemma, and transforms of reproduction laws.

Exact laws (``Fraction`` probabilities) give exact results from the DP
routines; float laws give float results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import BadSum, BudgetExceeded, Infeasible, Unreachable, ZeroMean
from .forest import PlanarForest, PlanarTree, ReproductionLaw, parse_forest
from .rng import as_rng

REJECTION_THRESHOLD = 1e-3


# ---------------------------------------------------------------------------
# walk distributions


def _convolve_exact(row: list, law: ReproductionLaw) -> list:
    out = [Fraction(0)] * (len(row) + law.max_value)
    for s, p in enumerate(row):
        if p:
            for v, q in zip(law.values, law.probs):
                out[s + v] += p * q
    return out


def walk_pmf_rows(law: ReproductionLaw, n_max: int) -> list:
    """Rows ``0..n_max`` of the convolution powers of ``law``.

    Row ``n`` lists ``P(xi_1 + ... + xi_n = s)`` for ``s = 0..n * max``:
    Fractions for exact laws, a float array otherwise.
    """
    if n_max < 0:
        raise ValueError("n must be nonnegative")
    if law.exact:
        rows = [[Fraction(1)]]
        for _ in range(n_max):
            rows.append(_convolve_exact(rows[-1], law))
        return rows
    kernel = np.zeros(law.max_value + 1)
    kernel[list(law.values)] = law.probs
    rows = [np.ones(1)]
    for _ in range(n_max):
        rows.append(np.convolve(rows[-1], kernel))
    return rows


def iter_walk_rows(law: ReproductionLaw, n_max: int, max_sum: int | None = None):
    """Yield ``(n, log_scale, row)`` for ``n = 0..n_max`` in float arithmetic.

    ``exp(log_scale) * row[s] = P(xi_1 + ... + xi_n = s)`` for
    ``s <= max_sum``.  Rows are rescaled as they go so deep tails do not
    underflow; truncating at ``max_sum`` is exact because steps are
    nonnegative.
    """
    law = law.to_float()
    kernel = np.zeros(law.max_value + 1)
    kernel[list(law.values)] = law.probs
    row = np.ones(1)
    log_scale = 0.0
    yield 0, log_scale, row
    for n in range(1, n_max + 1):
        row = np.convolve(row, kernel)
        if max_sum is not None:
            row = row[: max_sum + 1]
        peak = row.max()
        if peak > 0 and (peak < 1e-100 or peak > 1e100):
            row = row / peak
            log_scale += math.log(peak)
        yield n, log_scale, row


EXACT_CACHE_ROWS = 200


@lru_cache(maxsize=32)
def _exact_rows(law: ReproductionLaw) -> list:
    return [[Fraction(1)]]


def _walk_row(law: ReproductionLaw, n: int, max_sum: int | None = None):
    if n < 0:
        raise ValueError("n must be nonnegative")
    if law.exact and n <= EXACT_CACHE_ROWS:
        rows = _exact_rows(law)
        while len(rows) <= n:
            rows.append(_convolve_exact(rows[-1], law))
        return list(rows[n]) if max_sum is None else rows[n][: max_sum + 1]
    if law.exact:
        row = [Fraction(1)]
        for _ in range(n):
            row = _convolve_exact(row, law)
            if max_sum is not None:
                row = row[: max_sum + 1]
        return row
    for _, log_scale, row in iter_walk_rows(law, n, max_sum):
        pass
    return row * math.exp(log_scale)


def walk_pmf(law: ReproductionLaw, n: int) -> dict[int, object]:
    """Mapping ``s -> P(xi_1 + ... + xi_n = s)`` over the reachable sums.

    Exact convolution power, ``O(n^2 |support|)``.
    """
    row = _walk_row(law, n)
    return {s: (p if law.exact else float(p)) for s, p in enumerate(row) if p}


def _walk_mass(law: ReproductionLaw, n: int, s: int):
    if s < 0:
        return Fraction(0) if law.exact else 0.0
    row = _walk_row(law, n, max_sum=s)
    if s < len(row):
        return row[s] if law.exact else float(row[s])
    return Fraction(0) if law.exact else 0.0


def first_passage_pmf(law: ReproductionLaw, k: int, n: int):
    """``P(T_k = n)`` by Kemperman's formula ``(k/n) P(S_n = n - k)``."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    mass = _walk_mass(law, n, n - k)
    return Fraction(k, n) * mass if law.exact else k / n * mass


def first_passage_by_absorption(law: ReproductionLaw, k: int, n: int):
    """``P(T_k = n)`` by running the walk killed at ``-k``.

    Independent of Kemperman's formula; used to cross-check it.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    zero = Fraction(0) if law.exact else 0.0
    # alive[h] = P(walk at height h - k + 1 > -k, not yet absorbed); index = level + k
    alive = {k: Fraction(1) if law.exact else 1.0}
    for step in range(1, n + 1):
        nxt: dict[int, object] = {}
        hit = zero
        for h, p in alive.items():
            for v, q in zip(law.values, law.probs):
                h2 = h + v - 1
                if h2 == 0:
                    hit += p * q
                else:
                    nxt[h2] = nxt.get(h2, zero) + p * q
        if step == n:
            return hit
        alive = nxt
    return zero


def extinction_probability(law: ReproductionLaw, tol: float = 1e-15) -> float:
    """Smallest fixed point of the generating function on [0, 1]."""
    values = np.asarray(law.values, dtype=float)
    probs = np.asarray([float(p) for p in law.probs])
    q = 0.0
    for _ in range(100000):
        q_next = float(np.dot(probs, q**values))
        if abs(q_next - q) < tol:
            return q_next
        q = q_next
    return q


# ---------------------------------------------------------------------------
# free samplers


def _walk_prefix(law: ReproductionLaw, level: int, rng: np.random.Generator, cap: int):
    """Outdegrees of the Lukasiewicz walk up to its first passage at ``-level``,
    or its first ``cap`` steps if it has not got there.  Returns ``(seq, done)``.
    """
    chunks = []
    height = 0
    drawn = 0
    batch = 16
    while drawn < cap:
        batch = min(batch, cap - drawn)
        ys = law.sample(rng, batch)
        path = height + np.cumsum(ys - 1)
        hits = np.flatnonzero(path <= -level)
        if hits.size:
            chunks.append(ys[: hits[0] + 1])
            return np.concatenate(chunks), True
        chunks.append(ys)
        drawn += batch
        height = int(path[-1])
        batch *= 2
    return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64), False


def _walk_until(law: ReproductionLaw, level: int, rng: np.random.Generator, cap: int) -> np.ndarray:
    seq, done = _walk_prefix(law, level, rng, cap)
    if not done:
        raise BudgetExceeded(cap)
    return seq


def sample_tree(law: ReproductionLaw, rng, cap: int = 10**6) -> PlanarTree:
    """One Galton-Watson tree, generated in depth-first order.

    Raises :class:`BudgetExceeded` when the tree would exceed ``cap``
    vertices; it never truncates.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    seq = _walk_until(law, 1, as_rng(rng), cap)
    return PlanarTree._trusted(tuple(seq.tolist()))


def sample_forest(law: ReproductionLaw, k: int, rng, cap: int = 10**6) -> PlanarForest:
    """Free Galton-Watson forest with ``k`` ancestors, from one walk run to ``-k``."""
    if k < 1:
        raise ValueError("k must be positive")
    seq = _walk_until(law, k, as_rng(rng), cap)
    # first passage times at -1..-k; the walk is skip-free downwards
    sizes = _passage_sizes(seq, k)
    return PlanarForest._trusted(tuple(seq.tolist()), tuple(sizes.tolist()))


def _passage_sizes(seq: np.ndarray, k: int) -> np.ndarray:
    path = np.cumsum(seq - 1)
    levels = -np.minimum.accumulate(path)
    ends = np.searchsorted(levels, np.arange(1, k + 1)) + 1
    ends = ends[ends <= len(seq)]
    return np.diff(np.concatenate(([0], ends)))


def sample_forest_sizes(law: ReproductionLaw, k: int, rng, cap: int = 10**5) -> tuple[list[int], int | None]:
    """Tree sizes of a free ``k``-tree forest generated by one walk of at most ``cap`` steps.

    Returns ``(sizes, censored)``: the sizes of the trees completed within
    the budget, left to right, and, when fewer than ``k`` trees completed,
    a lower bound on the size of the next (unfinished) tree.
    """
    if k < 1:
        raise ValueError("k must be positive")
    seq, done = _walk_prefix(law, k, as_rng(rng), cap)
    sizes = _passage_sizes(seq, k).tolist()
    if done:
        return sizes, None
    return sizes, len(seq) - sum(sizes)


def sample_forests_by_rejection(spec: "ConditionedForestSpec", rng, size: int) -> list[PlanarForest]:
    """``size`` free ``k``-tree forests conditioned on ``n`` vertices, by rejection.

    Runs free walks for ``n`` steps in bulk and keeps those whose first
    passage at ``-k`` happens exactly at step ``n``.
    """
    rng = as_rng(rng)
    n, k = spec.n, spec.k
    kept: list[np.ndarray] = []
    have = 0
    accept = max(float(first_passage_pmf(spec.law.to_float(), k, n)), 1e-6)
    while have < size:
        rows = int(min(max(256, 1.2 * (size - have) / accept), max(256, (1 << 22) // n)))
        ys = spec.law.sample(rng, (rows, n))
        path = np.cumsum(ys - 1, axis=1)
        ok = path[:, -1] == -k
        if n > 1:
            ok &= path[:, :-1].min(axis=1) > -k
        good = ys[ok][: size - have]
        kept.append(good)
        have += len(good)
    out = []
    for seq in np.concatenate(kept).tolist():
        out.append(parse_forest(seq, k))
    return out


# ---------------------------------------------------------------------------
# cycle lemma


def valid_shifts(steps: Sequence[int], k: int) -> list[int]:
    """Rotations of an outdegree sequence that encode a ``k``-tree forest.

    Returns every ``r`` such that ``steps[r:] + steps[:r]`` first reaches
    ``-k`` at its last index.  By the cycle lemma there are exactly ``k``.
    """
    y = np.asarray(steps, dtype=np.int64)
    n = len(y)
    if n == 0 or (y < 0).any():
        raise BadSum("outdegrees must be a nonempty sequence of nonnegative integers")
    if int(y.sum()) != n - k:
        raise BadSum(f"outdegrees sum to {int(y.sum())}, expected n - k = {n - k}")
    s = np.concatenate(([0], np.cumsum(y - 1)))  # S_0..S_n
    prefix_min = np.minimum.accumulate(s)  # min S_0..S_r
    suffix_min = np.minimum.accumulate(s[::-1])[::-1]  # min S_r..S_n
    shifts = []
    if n == 1 or s[1:n].min() > -k:
        shifts.append(0)
    for r in range(1, n):
        if s[r] < prefix_min[r - 1] and s[r] - k < suffix_min[r + 1]:
            shifts.append(r)
    return shifts


def valid_shifts_brute(steps: Sequence[int], k: int) -> list[int]:
    """Check every rotation directly; quadratic, for testing."""
    n = len(steps)
    out = []
    for r in range(n):
        rot = list(steps[r:]) + list(steps[:r])
        level = 0
        for i, y in enumerate(rot):
            level += y - 1
            if level == -k:
                if i == n - 1:
                    out.append(r)
                break
    return out


# ---------------------------------------------------------------------------
# conditioned samplers


@dataclass(frozen=True)
class ConditionedForestSpec:
    """Galton-Watson forest with ``k`` ancestors conditioned on ``n`` vertices."""

    law: ReproductionLaw
    k: int
    n: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise Infeasible(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not sum_reachable(self.law, self.n, self.n - self.k):
            raise Infeasible(f"P(S_{self.n} = {self.n - self.k}) = 0 under {self.law}")


def sum_reachable(law: ReproductionLaw, n: int, total: int) -> bool:
    """Whether ``n`` draws from the support can add up to ``total``."""
    if total < n * law.support[0] or total > n * law.max_value:
        return False
    reach = np.zeros(total + 1, dtype=bool)
    reach[0] = True
    vals = [v for v in law.values if v <= total]
    for _ in range(n):
        nxt = np.zeros_like(reach)
        for v in vals:
            nxt[v:] |= reach[: total + 1 - v]
        reach = nxt
    return bool(reach[total])


def conditioned_acceptance(law: ReproductionLaw, n: int, total: int) -> float:
    """Acceptance rate of rejection sampling for ``sum == total``."""
    return float(_walk_mass(law.to_float(), n, total))


def _sample_rejection(law, n, total, rng, size):
    out = np.empty((size, n), dtype=np.int64)
    filled = 0
    accept = max(conditioned_acceptance(law, n, total), REJECTION_THRESHOLD)
    while filled < size:
        rows = int(min(max(64, 1.2 * (size - filled) / accept), max(64, (1 << 22) // n)))
        draws = law.sample(rng, (rows, n))
        good = draws[draws.sum(axis=1) == total]
        take = min(len(good), size - filled)
        out[filled : filled + take] = good[:take]
        filled += take
    return out


def _sample_backward_dp(law, n, total, rng, size):
    values = np.asarray(law.values, dtype=np.int64)
    probs = np.asarray([float(p) for p in law.probs])
    # rows[j][s] proportional to P(S_j = s), s <= total, each row rescaled to max 1
    rows = np.zeros((n + 1, total + 1))
    rows[0, 0] = 1.0
    for j in range(1, n + 1):
        row = np.zeros(total + 1)
        for v, p in zip(values, probs):
            if v <= total:
                row[v:] += p * rows[j - 1, : total + 1 - v]
        peak = row.max()
        rows[j] = row / peak if peak > 0 else row
    if rows[n, total] == 0:
        raise Infeasible(f"P(S_{n} = {total}) = 0")
    out = np.empty((size, n), dtype=np.int64)
    remaining = np.full(size, total, dtype=np.int64)
    for j in range(n, 0, -1):
        idx = remaining[:, None] - values[None, :]
        ok = idx >= 0
        weights = np.where(ok, probs[None, :] * rows[j - 1][np.where(ok, idx, 0)], 0.0)
        cdf = np.cumsum(weights, axis=1)
        u = rng.random(size) * cdf[:, -1]
        choice = (cdf <= u[:, None]).sum(axis=1)
        choice = np.minimum(choice, len(values) - 1)
        out[:, j - 1] = values[choice]
        remaining -= values[choice]
    return out


def sample_conditioned_sequences(
    law: ReproductionLaw, n: int, total: int, rng, size: int = 1, method: str = "auto"
) -> np.ndarray:
    """``size`` rows of ``n`` i.i.d. draws from ``law`` conditioned on summing to ``total``.

    ``method="auto"`` uses rejection unless its acceptance rate is below
    ``REJECTION_THRESHOLD``, then exact backward sampling from the
    convolution table.
    """
    rng = as_rng(rng)
    if not sum_reachable(law, n, total):
        raise Infeasible(f"P(S_{n} = {total}) = 0 under {law}")
    if method == "auto":
        method = "rejection" if conditioned_acceptance(law, n, total) >= REJECTION_THRESHOLD else "dp"
    if method == "rejection":
        return _sample_rejection(law, n, total, rng, size)
    if method == "dp":
        return _sample_backward_dp(law, n, total, rng, size)
    raise ValueError(f"unknown method {method!r}")


def forest_from_sequence(seq: Sequence[int], k: int, rng) -> PlanarForest:
    """Rotate an exchangeable sequence by a uniform valid shift and parse it."""
    shifts = valid_shifts(seq, k)
    r = shifts[int(as_rng(rng).integers(len(shifts)))]
    seq = list(seq)
    return parse_forest(seq[r:] + seq[:r], k)


def sample_forest_conditioned(spec: ConditionedForestSpec, rng, method: str = "auto") -> PlanarForest:
    """Galton-Watson forest with ``spec.k`` trees conditioned on ``spec.n`` vertices."""
    rng = as_rng(rng)
    seq = sample_conditioned_sequences(spec.law, spec.n, spec.n - spec.k, rng, 1, method)[0]
    return forest_from_sequence(seq.tolist(), spec.k, rng)


def sample_forests_conditioned(
    spec: ConditionedForestSpec, rng, size: int, method: str = "auto"
) -> list[PlanarForest]:
    rng = as_rng(rng)
    seqs = sample_conditioned_sequences(spec.law, spec.n, spec.n - spec.k, rng, size, method)
    shifts_u = rng.random(size)
    out = []
    for seq, u in zip(seqs.tolist(), shifts_u):
        shifts = valid_shifts(seq, spec.k)
        r = shifts[int(u * len(shifts))]
        out.append(parse_forest(seq[r:] + seq[:r], spec.k))
    return out


def sample_forest_by_rejection(spec: ConditionedForestSpec, rng, cap: int | None = None) -> PlanarForest:
    """Free ``k``-tree forests, resampled until the total size is ``n``."""
    rng = as_rng(rng)
    cap = cap or spec.n
    while True:
        try:
            forest = sample_forest(spec.law, spec.k, rng, cap=spec.n)
        except BudgetExceeded:
            continue
        if forest.n == spec.n:
            return forest


# ---------------------------------------------------------------------------
# law transforms


def exponential_tilt(law: ReproductionLaw, target_mean: float) -> ReproductionLaw:
    """Member of the exponential family of ``law`` with the given mean.

    Solves for ``log(theta)`` by bisection on ``[-60, 60]`` (200 halvings);
    the mean is strictly increasing in ``theta``.
    """
    values = np.asarray(law.values, dtype=float)
    logp = np.log([float(p) for p in law.probs])
    if len(values) < 2 or not values[0] < target_mean < values[-1]:
        raise Unreachable(
            f"target mean {target_mean} is not strictly between {law.support[0]} and {law.max_value}"
        )

    def tilted(t):
        w = logp + values * t
        w = np.exp(w - w.max())
        return w / w.sum()

    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.dot(values, tilted(mid))) < target_mean:
            lo = mid
        else:
            hi = mid
    probs = tilted(0.5 * (lo + hi))
    if abs(float(np.dot(values, probs)) - target_mean) > 1e-10:
        raise Unreachable(f"target mean {target_mean} not reachable with |log theta| <= 60")
    probs = probs / math.fsum(probs)
    return ReproductionLaw(tuple(law.values), tuple(float(p) for p in probs))


def size_biased(law: ReproductionLaw) -> ReproductionLaw:
    """``nu(l) = (l + 1) law(l + 1) / m``."""
    m = law.mean
    if m == 0:
        raise ZeroMean("size-biasing needs a positive mean")
    entries = {v - 1: v * p / m for v, p in zip(law.values, law.probs) if v > 0}
    if not law.exact:
        total = math.fsum(entries.values())
        entries = {v: p / total for v, p in entries.items()}
    return ReproductionLaw.from_mapping(entries)


def molloy_reed_criterion(law: ReproductionLaw):
    """``sum_l l (l - 2) law(l)``; positive means a giant component."""
    return sum(v * (v - 2) * p for v, p in zip(law.values, law.probs))
