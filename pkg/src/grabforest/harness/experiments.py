"""Monte Carlo experiments for the grabbing system and Galton-Watson samplers.

Every experiment is a pure function of its parameters and ``seed``.
Replicas are cut into fixed-size blocks; block ``b`` of configuration
``c`` draws from ``make_rng(seed, (c, b))``, so results do not depend on
how blocks are spread over worker processes.  Block outputs are merged in
block order.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import (
    ConditioningImpossible,
    DegenerateCells,
    GiantComponentWarning,
    HypothesisViolated,
    InvalidArms,
    OddStubs,
)
from ..forest import FLOAT_TOL, PlanarTree, ReproductionLaw, tree_probability
from ..grab import ArmVector, draw_conditioned_arms, simulate_shape
from ..gw import (
    ConditionedForestSpec,
    exponential_tilt,
    iter_walk_rows,
    molloy_reed_criterion,
    sample_conditioned_sequences,
    sample_forest_sizes,
    sample_forests_by_rejection,
    sample_forests_conditioned,
    size_biased,
    valid_shifts,
    valid_shifts_brute,
)
from ..oracle import exact_conditional_gw
from ..rng import make_rng, rng_metadata
from . import exact
from .report import ExperimentReport
from .stats import (
    MIN_EXPECTED,
    chi_square_test,
    count_tree,
    independence_test,
    mean_and_se,
    normalize_counts,
    pool_cells,
    tv_distance,
)

BLOCK = 500
P_MIN = 1e-3


def _blocks(reps: int, block: int) -> list[tuple[int, int]]:
    return [(b, min(block, reps - b * block)) for b in range(math.ceil(reps / block))]


def _map(fn, tasks: list[tuple], threads: int = 1) -> list:
    """``[fn(*t) for t in tasks]``, optionally in worker processes; order is kept."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _metadata(seed: int, block: int) -> dict:
    meta = rng_metadata(seed)
    meta["block_size"] = block
    meta["streams"] = "spawn key (configuration index, block index)"
    meta["min_expected_per_cell"] = MIN_EXPECTED
    return meta


def _pooled_decrease(values, errors, slack: float = 2.0) -> bool:
    """Each value at most the previous one plus ``slack`` pooled standard errors."""
    for i in range(1, len(values)):
        pooled = math.hypot(errors[i - 1], errors[i])
        if values[i] > values[i - 1] + slack * pooled:
            return False
    return True


def _require_not_supercritical(law: ReproductionLaw) -> None:
    m = law.mean
    if (m > 1) if law.exact else (m > 1 + FLOAT_TOL):
        raise HypothesisViolated(f"mean {float(m)} > 1: the law is supercritical")
    if law.pmf(0) == 0:
        raise HypothesisViolated("law(0) = 0: no particle can stay a leaf")


def _tree_tuple(tree: PlanarTree) -> tuple[int, ...]:
    return tuple(tree.dfs_outdegrees)


# ---------------------------------------------------------------------------
# empirical tree measure along n


def _theorem2_block(law, tree_seq, n, seed, stream, count):
    rng = make_rng(seed, stream)
    tree = PlanarTree._trusted(tree_seq)
    ks = np.empty(count, dtype=np.int64)
    hits = np.empty(count, dtype=np.int64)
    attempts = 0
    for i in range(count):
        arms, used = draw_conditioned_arms(law, n, rng)
        attempts += used
        shape = simulate_shape(arms, rng)
        ks[i] = shape.k
        hits[i] = count_tree(shape, tree)
    return ks, hits, attempts


def theorem2_experiment(
    law: ReproductionLaw,
    tree: PlanarTree,
    n_list,
    reps: int,
    seed: int,
    threads: int = 1,
    threshold: float | None = None,
    block: int = BLOCK,
) -> ExperimentReport:
    """Mean squared deviation of the proportion of ``tree`` from its GW mass, along ``n_list``."""
    _require_not_supercritical(law)
    n_list = [int(n) for n in n_list]
    target = float(tree_probability(law.to_float(), tree))
    report = ExperimentReport(
        "theorem2",
        {"law": law.to_text(), "tree": tree.to_text(), "n": n_list, "reps": reps, "seed": seed,
         "threshold": threshold},
        metadata=_metadata(seed, block),
    )
    report.details["target"] = target
    means, errors = [], []
    for c, n in enumerate(n_list):
        tasks = [(law, _tree_tuple(tree), n, seed, (c, b), cnt) for b, cnt in _blocks(reps, block)]
        parts = _map(_theorem2_block, tasks, threads)
        ks = np.concatenate([p[0] for p in parts])
        hits = np.concatenate([p[1] for p in parts])
        attempts = sum(p[2] for p in parts)
        sq = (hits / ks - target) ** 2
        mean, se = mean_and_se(sq)
        means.append(mean)
        errors.append(se)
        report.add(n, "l2", mean, se)
        report.add(n, "l2_exact", exact.theorem2_l2(law, tree, n))
        report.add(n, "proportion", *mean_and_se(hits / ks))
        report.add(n, "acceptance_rate", reps / attempts)
    report.criteria["l2_decreasing_2se"] = _pooled_decrease(means, errors)
    if threshold is not None:
        report.criteria[f"l2_below_{threshold}_at_n={n_list[-1]}"] = bool(means[-1] < threshold)
    return report


# ---------------------------------------------------------------------------
# two leftmost trees


def _pair_block(law, t1, t2, n, seed, stream, count):
    rng = make_rng(seed, stream)
    s1, s2 = len(t1), len(t2)
    hits = np.zeros(count, dtype=np.int8)
    for i in range(count):
        arms, _ = draw_conditioned_arms(law, n, rng)
        shape = simulate_shape(arms, rng)
        sizes = shape.sizes
        if len(sizes) >= 3 and sizes[0] == s1 and sizes[1] == s2:
            seq = shape.outdegrees
            hits[i] = seq[:s1] == t1 and seq[s1 : s1 + s2] == t2
    return hits


def pair_factorization_experiment(
    law: ReproductionLaw,
    t1: PlanarTree,
    t2: PlanarTree,
    n,
    reps: int,
    seed: int,
    threads: int = 1,
    block: int = BLOCK,
) -> ExperimentReport:
    """``P_n(tau_1 = t1, tau_2 = t2, k(n) >= 3)`` against the product of tree masses.

    ``tau_1, tau_2`` are the two leftmost trees on the axis.  ``n`` may be a
    single size or a list; the criteria use the largest.
    """
    _require_not_supercritical(law)
    n_list = [int(n)] if np.isscalar(n) else [int(v) for v in n]
    flaw = law.to_float()
    product = float(tree_probability(flaw, t1)) * float(tree_probability(flaw, t2))
    report = ExperimentReport(
        "pair_factorization",
        {"law": law.to_text(), "t1": t1.to_text(), "t2": t2.to_text(), "n": n_list, "reps": reps,
         "seed": seed},
        metadata=_metadata(seed, block),
    )
    report.details["product"] = product
    for c, size in enumerate(n_list):
        tasks = [(law, _tree_tuple(t1), _tree_tuple(t2), size, seed, (c, b), cnt) for b, cnt in _blocks(reps, block)]
        hits = np.concatenate(_map(_pair_block, tasks, threads))
        est = float(hits.mean())
        se = math.sqrt(max(est * (1 - est), 0.0) / reps)
        report.add(size, "estimate", est, se)
        report.add(size, "finite_n_exact", exact.pair_probability(law, t1, t2, size))
        report.add(size, "product", product)
    finite = report.value("finite_n_exact", n_list[-1])
    report.criteria["within_3se_of_finite_n_value"] = abs(est - finite) <= 3 * se + 1e-12
    report.criteria["within_3se_of_product"] = abs(est - product) <= 3 * se + 1e-12
    return report


# ---------------------------------------------------------------------------
# number of trees


def _tree_count_block(law, n, seed, stream, count):
    rng = make_rng(seed, stream)
    ks = np.empty(count, dtype=np.int64)
    for i in range(count):
        arms, _ = draw_conditioned_arms(law, n, rng)
        ks[i] = simulate_shape(arms, rng).k
    return ks


def tree_count_experiment(
    law: ReproductionLaw,
    n_list,
    reps: int,
    seed: int,
    K_grid=(1, 5, 10, 20),
    threads: int = 1,
    block: int = BLOCK,
) -> ExperimentReport:
    """``P_n(k(n) >= K)`` along ``n_list``, with the exact finite-n values."""
    _require_not_supercritical(law)
    n_list = [int(n) for n in n_list]
    m = float(law.mean)
    report = ExperimentReport(
        "tree_count",
        {"law": law.to_text(), "n": n_list, "reps": reps, "seed": seed, "K": list(K_grid)},
        metadata=_metadata(seed, block),
    )
    est = {K: [] for K in K_grid}
    agree = True
    for c, n in enumerate(n_list):
        tasks = [(law, n, seed, (c, b), cnt) for b, cnt in _blocks(reps, block)]
        ks = np.concatenate(_map(_tree_count_block, tasks, threads))
        weights = exact.tree_count_weights(law, n)
        for K in K_grid:
            p = float((ks >= K).mean())
            se = math.sqrt(p * (1 - p) / reps)
            ex = float(weights[max(K, 1) :].sum())
            est[K].append((p, se))
            report.add(n, f"P(k>={K})", p, se)
            report.add(n, f"P(k>={K})_exact", ex)
            # 4 SE: many cells are compared at once
            agree &= abs(p - ex) <= 4 * se + 1e-9
        report.add(n, "k_over_n", *mean_and_se(ks / n))
        if m < 1:
            report.add(n, "one_minus_m", 1 - m)
    report.criteria["agrees_with_exact_4se"] = bool(agree)
    for K in K_grid:
        vals = [-p for p, _ in est[K]]
        report.criteria[f"P(k>={K})_increasing_2se"] = _pooled_decrease(vals, [se for _, se in est[K]])
    return report


# ---------------------------------------------------------------------------
# supercritical laws


def _supercrit_block(law, n, weights, seed, stream, count):
    rng = make_rng(seed, stream)
    ks = rng.choice(len(weights), size=count, p=weights)
    out = np.empty(count, dtype=np.int64)
    for k in np.unique(ks):
        idx = np.flatnonzero(ks == k)
        seqs = sample_conditioned_sequences(law, n, n - int(k), rng, size=len(idx))
        for i, row in zip(idx, seqs.tolist()):
            out[i] = simulate_shape(ArmVector(tuple(row)), rng).k
    return out


def _tilt_block(law, n, seed, stream, count):
    rng = make_rng(seed, stream)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        arms, _ = draw_conditioned_arms(law, n, rng)
        out[i] = simulate_shape(arms, rng).k
    return out


def _lattice(weights: np.ndarray) -> tuple[int, int]:
    """Smallest reachable ``k`` and the step between reachable values."""
    support = np.flatnonzero(weights)
    step = int(np.gcd.reduce(np.diff(support))) if support.size > 1 else 1
    return int(support[0]), step


def _fit_geometric(ks: np.ndarray, k0: int, step: int):
    """Geometric law on ``k0, k0 + step, ...`` fitted by maximum likelihood, with a GOF test.

    Returns the ratio ``r`` between successive masses, its standard error,
    and the chi-square statistic and p-value (one fitted parameter).
    """
    js = (ks - k0) // step
    jbar, se = mean_and_se(js)
    r = jbar / (1 + jbar)
    r_se = se / (1 + jbar) ** 2
    if r <= 0:
        return r, r_se, float("nan"), float("nan")
    top = int(js.max()) + 1
    while r**top * len(js) >= 1e-3:
        top += 1
    expected = {j: (1 - r) * r**j for j in range(top + 1)}
    try:
        stat, p = chi_square_test(Counter(js.tolist()), expected, len(js), ddof=1)
    except DegenerateCells:
        stat, p = float("nan"), float("nan")
    return r, r_se, stat, p


def supercritical_k_experiment(
    law: ReproductionLaw,
    n,
    reps: int,
    seed: int,
    c: float = 0.3,
    tilt_n: int | None = None,
    threads: int = 1,
    block: int = BLOCK,
) -> ExperimentReport:
    """Law of ``k(n)`` given ``k(n) >= 1`` for a supercritical law.

    ``k(n)`` is drawn from its exact conditional law (rejection on the arms
    is hopeless: ``P(k(n) >= 1)`` decays exponentially), the arms from the
    i.i.d. law given their sum, and the terminal state is simulated.  A
    geometric law is fitted; no parameter is asserted.  The tilted check
    runs the system under the law tilted to mean ``1 - c`` and compares
    ``k(n) / n`` with ``c``.
    """
    m = law.mean
    if not ((m > 1) if law.exact else (m > 1 + FLOAT_TOL)):
        raise HypothesisViolated(f"mean {float(m)} <= 1: the law is not supercritical")
    if law.pmf(0) == 0:
        raise HypothesisViolated("law(0) = 0 makes k(n) >= 1 impossible")
    n_list = [int(n)] if np.isscalar(n) else [int(v) for v in n]
    tilt_n = tilt_n or n_list[-1]
    report = ExperimentReport(
        "supercritical_k",
        {"law": law.to_text(), "n": n_list, "reps": reps, "seed": seed, "c": c, "tilt_n": tilt_n},
        metadata=_metadata(seed, block),
    )
    fit_ok = True
    for ci, size in enumerate(n_list):
        weights = exact.tree_count_weights(law, size)
        tasks = [(law, size, weights, seed, (ci, b), cnt) for b, cnt in _blocks(reps, block)]
        ks = np.concatenate(_map(_supercrit_block, tasks, threads))
        k0, step = _lattice(weights)
        r, r_se, stat, p = _fit_geometric(ks, k0, step)
        exact_j = float(np.dot((np.arange(len(weights)) - k0) / step, weights))
        r_exact = exact_j / (1 + exact_j)
        report.add(size, "lattice_start", k0)
        report.add(size, "lattice_step", step)
        report.add(size, "geometric_ratio", r, r_se)
        report.add(size, "geometric_ratio_exact_mean", r_exact)
        report.add(size, "exact_first_ratio", float(weights[k0 + step] / weights[k0]))
        report.add(size, "gof_statistic", stat)
        report.add(size, "gof_p_value", p)
        fit_ok &= abs(r - r_exact) <= 4 * r_se + 1e-12
        pmf = Counter(ks.tolist())
        report.details[f"k_pmf_n={size}"] = {str(j): pmf[j] / reps for j in sorted(pmf)}
    grid = sorted({max(2, n_list[-1] // 8), max(2, n_list[-1] // 4), max(2, n_list[-1] // 2), n_list[-1]})
    accept = exact.prob_k_positive_series(law, grid)
    for size in grid:
        report.add(size, "P(k>=1)", accept[size])
    report.criteria["fit_matches_exact_mean_4se"] = bool(fit_ok)
    report.criteria["P(k>=1)_decreasing"] = all(accept[a] > accept[b] for a, b in zip(grid, grid[1:]))

    tilted = exponential_tilt(law.to_float(), 1 - c)
    report.details["tilted_law"] = tilted.to_text()
    tasks = [(tilted, tilt_n, seed, (len(n_list), b), cnt) for b, cnt in _blocks(reps, block)]
    ks = np.concatenate(_map(_tilt_block, tasks, threads))
    mean, se = mean_and_se(ks / tilt_n)
    report.add(tilt_n, "tilted_k_over_n", mean, se)
    report.criteria["tilted_k_over_n_near_c_4se"] = abs(mean - c) <= 4 * se + 1.0 / tilt_n
    return report


# ---------------------------------------------------------------------------
# configuration model


def _fix_parity(deg: np.ndarray, law: ReproductionLaw, rng) -> np.ndarray:
    """Resample one uniform vertex until the total degree is even."""
    if int(deg.sum()) % 2 == 0:
        return deg
    parities = {v % 2 for v in law.values}
    if len(parities) < 2:
        raise OddStubs("every degree has the same parity and the total is odd")
    i = int(rng.integers(len(deg)))
    while True:
        d = int(law.sample(rng, 1)[0])
        if (d - int(deg[i])) % 2:
            deg[i] = d
            return deg


def configuration_cluster_sizes(law: ReproductionLaw, n: int, arms: int, rng) -> np.ndarray:
    """Cluster sizes of ``arms`` uniform arms (with replacement) in one configuration-model graph."""
    deg = _fix_parity(law.sample(rng, n).astype(np.int64), law, rng)
    stubs = np.repeat(np.arange(n), deg)
    if stubs.size == 0:
        raise InvalidArms("the configuration model has no arms to select")
    perm = rng.permutation(stubs.size)
    a, b = stubs[perm[0::2]], stubs[perm[1::2]]
    graph = coo_matrix((np.ones(a.size), (a, b)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    comp_size = np.bincount(labels)
    pick = rng.integers(0, stubs.size, size=arms)
    return comp_size[labels[stubs[pick]]]


def _config_task(law, n, seed, stream, arms):
    return configuration_cluster_sizes(law, n, arms, make_rng(seed, stream))


def _joined_trees_block(nu, seed, stream, count, cap):
    rng = make_rng(seed, stream)
    out = []
    for _ in range(count):
        sizes, censored = sample_forest_sizes(nu, 2, rng, cap)
        out.append(sum(sizes) if censored is None else -1)
    return np.asarray(out, dtype=np.int64)


def _grab_contrast_task(law, n, seed, stream):
    rng = make_rng(seed, stream)
    arms, _ = draw_conditioned_arms(law, n, rng)
    return np.asarray(simulate_shape(arms, rng).sizes, dtype=np.int64)


def _size_counts(sizes: np.ndarray) -> Counter:
    counts = Counter(sizes.tolist())
    if -1 in counts:
        counts["censored"] = counts.pop(-1)
    return counts


def config_model_cluster_experiment(
    law: ReproductionLaw,
    n: int,
    reps: int,
    seed: int,
    arms_per_graph: int | None = None,
    cap: int = 10**5,
    tol: float = 0.02,
    threads: int = 1,
    block: int = BLOCK * 10,
) -> ExperimentReport:
    """Cluster size of a uniform arm in the configuration model vs two joined GW(nu) trees.

    ``reps`` arms are drawn, ``arms_per_graph`` from each independent graph
    on ``n`` vertices.  The grabbing-system contrast (size of a uniformly
    chosen terminal tree) is reported, not asserted.
    """
    if law.max_value == 0:
        raise InvalidArms("the configuration model has no arms to select")
    criterion = molloy_reed_criterion(law)
    if criterion > 0:
        warnings.warn(
            f"sum l(l-2)law(l) = {float(criterion)} > 0: a giant component is expected",
            GiantComponentWarning,
            stacklevel=2,
        )
    nu = size_biased(law)
    arms_per_graph = arms_per_graph or max(1, min(reps, n // 10))
    report = ExperimentReport(
        "config_model_cluster",
        {"law": law.to_text(), "n": n, "reps": reps, "seed": seed, "arms_per_graph": arms_per_graph,
         "cap": cap, "tol": tol},
        metadata=_metadata(seed, block),
    )
    report.details["nu"] = nu.to_text()
    report.details["molloy_reed"] = float(criterion)

    graphs = _blocks(reps, arms_per_graph)
    config = np.concatenate(_map(_config_task, [(law, n, seed, (0, g), cnt) for g, cnt in graphs], threads))
    joined = np.concatenate(
        _map(_joined_trees_block, [(nu.to_float(), seed, (1, b), cnt, cap) for b, cnt in _blocks(reps, block)], threads)
    )
    p_config = normalize_counts(_size_counts(config))
    p_joined = normalize_counts(_size_counts(joined))
    tv = float(tv_distance(p_config, p_joined))
    report.add(n, "tv_config_vs_joined_gw", tv)
    report.add(n, "mean_cluster_size_config", float(config.mean()))
    finite = joined[joined > 0]
    report.add(n, "mean_size_joined_gw", float(finite.mean()) if finite.size else None)
    report.criteria[f"tv_below_{tol}"] = tv < tol

    # grabbing-system contrast: trees of one terminal state, uniformly chosen
    # (skipped when k(n) >= 1 is too rare to condition on by rejection)
    try:
        if float(law.mean) > 1 + FLOAT_TOL:
            raise ConditioningImpossible("supercritical law")
        trees = _grab_contrast_task(law, n, seed, (2, 0))
    except ConditioningImpossible:
        report.add(n, "tv_grab_uniform_cluster_vs_config_arm", None)
    else:
        p_grab = normalize_counts(Counter(trees.tolist()))
        report.add(n, "tv_grab_uniform_cluster_vs_config_arm", float(tv_distance(p_grab, p_config)))
    report.details["cluster_size_pmf"] = {
        "config": {str(key): v for key, v in sorted(p_config.items(), key=lambda kv: str(kv[0]))[:50]},
    }
    return report


# ---------------------------------------------------------------------------
# Galton-Watson forests


def first_passage_series(law: ReproductionLaw, j: int, m_max: int) -> dict[int, float]:
    """``{m: P(T_j = m)}`` for ``m = j..m_max`` in float arithmetic."""
    out = {}
    for m, log_scale, row in iter_walk_rows(law, m_max, max_sum=m_max):
        if m >= j and row.size > m - j and row[m - j] > 0:
            out[m] = float(j / m * row[m - j] * math.exp(log_scale))
    return out


def _dwass_block(law, k, seed, stream, count, cap):
    """Per replica a ``k``-vector: size if completed, ``-lb`` if cut off with at least ``lb`` vertices, 0 if unseen."""
    rng = make_rng(seed, stream)
    out = np.zeros((count, k), dtype=np.int64)
    for i in range(count):
        sizes, censored = sample_forest_sizes(law, k, rng, cap)
        out[i, : len(sizes)] = sizes
        if censored is not None:
            out[i, len(sizes)] = -censored
    return out


def dwass_experiment(
    law: ReproductionLaw,
    k: int,
    reps: int,
    seed: int,
    cap: int = 10**5,
    m_max: int = 2000,
    threads: int = 1,
    block: int = BLOCK * 10,
) -> ExperimentReport:
    """Tree sizes of a free ``k``-tree forest against i.i.d. copies of ``T_1``.

    Each forest comes from one walk; a tree still unfinished after ``cap``
    steps of its own counts as a tail observation and hides the trees after
    it.
    """
    expected = first_passage_series(law.to_float(), 1, m_max)
    report = ExperimentReport(
        "dwass",
        {"law": law.to_text(), "k": k, "reps": reps, "seed": seed, "cap": cap, "m_max": m_max},
        metadata=_metadata(seed, block),
    )
    tasks = [(law, k, seed, (0, b), cnt, cap) for b, cnt in _blocks(reps, block)]
    obs = np.concatenate(_map(_dwass_block, tasks, threads))
    cell_of, _, _ = pool_cells(expected, reps)
    cutoff = max((key for key, cell in cell_of.items() if cell == key), default=0)

    def category(v):
        if v > 0:
            return v if v <= cutoff else "tail"
        if v < 0 and -v > cutoff:
            return "tail"
        return None  # unseen, or cut off below the last separate cell

    cats = [[category(v) for v in row] for row in obs.tolist()]
    p_ok = True
    for i in range(k):
        seen = Counter(c[i] for c in cats if c[i] is not None)
        total = sum(seen.values())
        stat, p = chi_square_test(seen, expected, total)
        report.add(i + 1, "marginal_chi2", stat)
        report.add(i + 1, "marginal_p_value", p)
        report.add(i + 1, "observed", total)
        p_ok &= p > P_MIN
    report.criteria[f"marginals_p>{P_MIN}"] = bool(p_ok)
    if k >= 2:
        pairs = [(c[0], c[1]) for c in cats if c[0] is not None and c[1] is not None]
        stat, p = independence_test(pairs)
        report.add(2, "independence_chi2", stat)
        report.add(2, "independence_p_value", p)
        report.criteria[f"independence_p>{P_MIN}"] = p > P_MIN
    return report


def cycle_lemma_check(cases: int, seed: int, n_max: int = 20) -> ExperimentReport:
    """Random outdegree sequences: every one has exactly ``k`` valid shifts."""
    rng = make_rng(seed, (0, 0))
    bad = 0
    mismatch = 0
    for _ in range(cases):
        n = int(rng.integers(1, n_max + 1))
        k = int(rng.integers(1, n + 1))
        seq = rng.multinomial(n - k, np.full(n, 1.0 / n)).tolist()
        shifts = valid_shifts(seq, k)
        bad += len(shifts) != k
        mismatch += shifts != valid_shifts_brute(seq, k)
    report = ExperimentReport(
        "cycle_lemma", {"cases": cases, "seed": seed, "n_max": n_max}, metadata=_metadata(seed, cases)
    )
    report.add(n_max, "wrong_cardinality", bad)
    report.add(n_max, "disagrees_with_direct_check", mismatch)
    report.criteria["exactly_k_shifts"] = bad == 0
    report.criteria["matches_direct_check"] = mismatch == 0
    return report


def _conditioned_block(spec, seed, stream, count, method):
    rng = make_rng(seed, stream)
    if method == "rejection":
        forests = sample_forests_by_rejection(spec, rng, count)
    else:
        forests = sample_forests_conditioned(spec, rng, count)
    return Counter(f.to_text() for f in forests)


def sampler_equivalence_experiment(
    law: ReproductionLaw,
    k: int,
    n: int,
    reps: int,
    seed: int,
    tol: float = 0.01,
    threads: int = 1,
    block: int = 10**4,
) -> ExperimentReport:
    """Cycle-lemma sampler vs rejection on free forests, in total variation."""
    spec = ConditionedForestSpec(law, k, n)
    report = ExperimentReport(
        "sampler_equivalence",
        {"law": law.to_text(), "k": k, "n": n, "reps": reps, "seed": seed, "tol": tol},
        metadata=_metadata(seed, block),
    )
    laws = {}
    for c, method in enumerate(("cycle_lemma", "rejection")):
        tasks = [(spec, seed, (c, b), cnt, method) for b, cnt in _blocks(reps, block)]
        counts = sum(_map(_conditioned_block, tasks, threads), Counter())
        laws[method] = normalize_counts(counts)
    tv = float(tv_distance(laws["cycle_lemma"], laws["rejection"]))
    report.add(n, "tv_cycle_lemma_vs_rejection", tv)
    report.criteria[f"tv_below_{tol}"] = tv < tol
    if law.exact and n <= 10:
        truth = {key: float(p) for key, p in exact_conditional_gw(law, k, n).outcomes.items()}
        for method, emp in laws.items():
            report.add(n, f"tv_{method}_vs_exact", float(tv_distance(emp, truth)))
    return report


# ---------------------------------------------------------------------------
# conditioned pipeline against the exact conditioned GW law


def _theorem1_block(law, k, n, seed, stream, count):
    rng = make_rng(seed, stream)
    seqs = sample_conditioned_sequences(law, n, n - k, rng, size=count)
    return Counter(simulate_shape(ArmVector(tuple(row)), rng).to_text() for row in seqs.tolist())


def theorem1_experiment(
    law: ReproductionLaw,
    k: int,
    n: int,
    reps: int,
    seed: int,
    threads: int = 1,
    block: int = 10**4,
) -> ExperimentReport:
    """Arms i.i.d. given their sum is ``n - k``, run the system, compare shapes to the exact law."""
    if not law.exact:
        law = ReproductionLaw(law.values, tuple(Fraction(p).limit_denominator(10**12) for p in law.probs))
    truth = exact_conditional_gw(law, k, n)
    expected = {key: float(p) for key, p in truth.outcomes.items()}
    report = ExperimentReport(
        "theorem1_monte_carlo",
        {"law": law.to_text(), "k": k, "n": n, "reps": reps, "seed": seed},
        metadata=_metadata(seed, block),
    )
    tasks = [(law, k, n, seed, (0, b), cnt) for b, cnt in _blocks(reps, block)]
    counts = sum(_map(_theorem1_block, tasks, threads), Counter())
    stat, p = chi_square_test(counts, expected, reps)
    report.add(n, "chi2", stat)
    report.add(n, "p_value", p)
    report.add(n, "tv_vs_exact", float(tv_distance(normalize_counts(counts), expected)))
    report.add(n, "support_size", len(expected))
    report.criteria[f"p>{P_MIN}"] = p > P_MIN
    report.details["counts"] = dict(sorted(counts.items()))
    return report
