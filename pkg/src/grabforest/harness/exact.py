"""Exact finite-n quantities under the conditioned law P_n.

Under P_n the number of trees k(n) has ``P_n(k(n) = k)`` proportional to
``w_k = P(S_n = n - k)`` for ``k >= 1``, and given ``k(n) = k`` the terminal
shape is a Galton-Watson forest with ``k`` trees conditioned on ``n``
vertices.  Combined with Kemperman's formula this gives closed forms for
the Monte Carlo targets, evaluated here on log-rescaled convolution rows so
that ``n`` in the thousands does not underflow.
"""

from __future__ import annotations

import math

import numpy as np

from ..forest import PlanarTree, ReproductionLaw, tree_probability
from ..gw import iter_walk_rows


def walk_rows_at(law: ReproductionLaw, ms) -> dict[int, tuple[float, np.ndarray]]:
    """``{m: (log_scale, row)}`` with ``exp(log_scale) * row[s] = P(S_m = s)``, ``s <= m``."""
    wanted = {int(m) for m in ms if m >= 0}
    out = {}
    if not wanted:
        return out
    for m, log_scale, row in iter_walk_rows(law, max(wanted), max_sum=max(wanted)):
        if m in wanted:
            padded = np.zeros(m + 1)
            padded[: min(len(row), m + 1)] = row[: m + 1]
            out[m] = (log_scale, padded)
    return out


def tree_count_weights(law: ReproductionLaw, n: int) -> np.ndarray:
    """``P_n(k(n) = k)`` for ``k = 0..n`` (entry 0 is 0)."""
    _, row = walk_rows_at(law, [n])[n]
    w = np.zeros(n + 1)
    w[1:] = row[n - 1 :: -1][:n]  # w[k] = row[n - k]
    total = w.sum()
    if total == 0:
        raise ValueError(f"k(n) >= 1 has probability 0 at n={n}")
    return w / total


def prob_k_at_least(law: ReproductionLaw, n: int, K: int) -> float:
    w = tree_count_weights(law, n)
    return float(w[max(K, 1) :].sum())


def prob_k_positive(law: ReproductionLaw, n: int) -> float:
    """``P(k(n) >= 1) = P(S_n <= n - 1)`` without conditioning."""
    log_scale, row = walk_rows_at(law, [n])[n]
    mass = row[:n].sum()
    return float(math.exp(log_scale + math.log(mass))) if mass > 0 else 0.0


def _passage_ratio(rows, j: int, m: int, k: int, n: int) -> float:
    """``P(T_j = m) / P(T_k = n)`` from the rescaled rows; ``P(T_0 = m) = 1{m = 0}``."""
    ls_n, row_n = rows[n]
    # in logs: the rescaled entries may be subnormal
    log_den = math.log(row_n[n - k]) + math.log(k / n) + ls_n
    if j == 0:
        return math.exp(-log_den) if m == 0 else 0.0
    if m < j:
        return 0.0
    ls_m, row_m = rows[m]
    num = row_m[m - j]
    if num == 0:
        return 0.0
    return math.exp(math.log(num) + math.log(j / m) + ls_m - log_den)


def theorem2_l2(law: ReproductionLaw, tree: PlanarTree, n: int) -> float:
    """``E_n[(N_t / k(n) - p)^2]`` where ``N_t`` counts trees equal to ``tree``."""
    p = float(tree_probability(law.to_float(), tree))
    s = tree.size
    rows = walk_rows_at(law, [n, n - s, n - 2 * s])
    weights = tree_count_weights(law, n)
    total = 0.0
    for k in range(1, n + 1):
        wk = weights[k]
        if wk == 0:
            continue
        if p == 0:
            continue  # N_t = 0 and the deviation is p - p = 0
        r1 = _passage_ratio(rows, k - 1, n - s, k, n)
        mean_n = k * p * r1
        if k >= 2:
            r2 = _passage_ratio(rows, k - 2, n - 2 * s, k, n)
            fact2 = k * (k - 1) * p * p * r2
        else:
            fact2 = 0.0
        second = fact2 + mean_n
        total += wk * (second / k**2 - 2 * p * mean_n / k + p * p)
    return float(total)


def pair_probability(law: ReproductionLaw, t1: PlanarTree, t2: PlanarTree, n: int) -> float:
    """``P_n(tau_1 = t1, tau_2 = t2, k(n) >= 3)``."""
    p = float(tree_probability(law.to_float(), t1)) * float(tree_probability(law.to_float(), t2))
    if p == 0:
        return 0.0
    m = n - t1.size - t2.size
    rows = walk_rows_at(law, [n, m])
    weights = tree_count_weights(law, n)
    total = 0.0
    for k in range(3, n + 1):
        if weights[k] == 0:
            continue
        total += weights[k] * p * _passage_ratio(rows, k - 2, m, k, n)
    return float(total)


def ratio_limit(law: ReproductionLaw, n: int, ell: int) -> float:
    """``P(S_n <= n - ell) / P(S_n <= n)``."""
    _, row = walk_rows_at(law, [n])[n]
    den = row[: n + 1].sum()
    num = row[: max(n - ell + 1, 0)].sum()
    return float(num / den)


def prob_k_positive_series(law: ReproductionLaw, ns) -> dict[int, float]:
    """``P(k(n) >= 1)`` for several ``n`` in one pass over the rows."""
    wanted = sorted(set(ns))
    out = {}
    for m, log_scale, row in iter_walk_rows(law, wanted[-1], max_sum=wanted[-1]):
        if m in wanted:
            mass = row[:m].sum()
            out[m] = float(math.exp(log_scale + math.log(mass))) if mass > 0 else 0.0
    return out
