"""Exact checks: uniformity of the terminal law, the conditioned GW mixture,
Kemperman's formula, the ratio limit, and the law transforms."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from ..errors import HypothesisViolated, PeriodicSupport
from ..forest import FLOAT_TOL, ReproductionLaw
from ..grab import ArmVector
from ..gw import (
    exponential_tilt,
    first_passage_by_absorption,
    first_passage_pmf,
    molloy_reed_criterion,
    size_biased,
    sum_reachable,
    walk_pmf_rows,
)
from ..oracle import (
    enumerate_phi,
    enumerated_normalizer,
    exact_conditional_gw,
    exact_terminal_law,
    mixture_terminal_shape_law,
)
from . import exact
from .report import ExperimentReport


def lemma1_check(arms: ArmVector) -> ExperimentReport:
    """Exact terminal law of ``arms`` against the uniform law on Phi(arms)."""
    law = exact_terminal_law(arms)
    phi = {f.to_text() for f in enumerate_phi(arms)}
    report = ExperimentReport("lemma1", {"arms": list(arms.counts)})
    report.add(arms.n, "states", len(law))
    report.add(arms.n, "phi_size", len(phi))
    probs = set(law.outcomes.values())
    report.add(arms.n, "probability", str(probs.pop()) if len(probs) == 1 else None)
    report.criteria["support_equals_phi"] = set(law.support()) == phi
    report.criteria["uniform_exact"] = law.is_uniform()
    return report


def arm_vectors(n_max: int, sum_max: int):
    """Every arm vector with ``2 <= n <= n_max`` and ``sum <= min(sum_max, n - 1)``."""
    for n in range(2, n_max + 1):
        for counts in itertools.product(range(min(sum_max, n - 1) + 1), repeat=n):
            if sum(counts) <= min(sum_max, n - 1):
                yield ArmVector(counts)


def lemma1_all(n_max: int = 5, sum_max: int = 4) -> ExperimentReport:
    report = ExperimentReport("lemma1_exhaustive", {"n_max": n_max, "sum_max": sum_max})
    checked = failed = 0
    for arms in arm_vectors(n_max, sum_max):
        one = lemma1_check(arms)
        checked += 1
        if not one.passed:
            failed += 1
            report.details.setdefault("failures", []).append(list(arms.counts))
    report.add(n_max, "vectors_checked", checked)
    report.add(n_max, "failures", failed)
    report.criteria["uniform_for_every_vector"] = failed == 0
    return report


def theorem1_exact(law: ReproductionLaw, n_max: int = 6) -> ExperimentReport:
    """Mixture of uniform-on-Phi shape laws under conditioned i.i.d. arms vs the conditioned GW law."""
    report = ExperimentReport("theorem1_exact", {"law": law.to_text(), "n_max": n_max})
    pairs = mismatched = 0
    for n in range(2, n_max + 1):
        for k in range(1, n + 1):
            if not sum_reachable(law, n, n - k):
                continue
            pairs += 1
            if mixture_terminal_shape_law(law, k, n) != exact_conditional_gw(law, k, n):
                mismatched += 1
                report.details.setdefault("mismatches", []).append([k, n])
    report.add(n_max, "feasible_pairs", pairs)
    report.add(n_max, "mismatches", mismatched)
    report.criteria["mixture_equals_conditioned_gw"] = mismatched == 0 and pairs > 0
    return report


def passage_series_by_absorption(law: ReproductionLaw, k: int, n_max: int) -> list:
    """``[P(T_k = n) for n = 0..n_max]`` from one run of the walk killed at ``-k``."""
    zero = Fraction(0) if law.exact else 0.0
    out = [zero] * (n_max + 1)
    alive = {k: Fraction(1) if law.exact else 1.0}  # height above -k
    for step in range(1, n_max + 1):
        nxt: dict[int, object] = {}
        for h, p in alive.items():
            for v, q in zip(law.values, law.probs):
                h2 = h + v - 1
                if h2 == 0:
                    out[step] += p * q
                else:
                    nxt[h2] = nxt.get(h2, zero) + p * q
        alive = nxt
    return out


def kemperman_check(law: ReproductionLaw, n_max: int = 40, normalizer_max: int = 10) -> ExperimentReport:
    """Kemperman's formula against the killed walk, and against forest enumeration for small n."""
    report = ExperimentReport(
        "kemperman", {"law": law.to_text(), "n_max": n_max, "normalizer_max": normalizer_max}
    )
    rows = walk_pmf_rows(law, n_max)
    zero = Fraction(0) if law.exact else 0.0
    dev_formula = dev_absorb = dev_enum = zero
    for k in range(1, n_max):
        absorbed = passage_series_by_absorption(law, k, n_max)
        for n in range(k + 1, n_max + 1):
            fp = first_passage_pmf(law, k, n)
            row = rows[n]
            ws = row[n - k] if n - k < len(row) else zero
            direct = (Fraction(k, n) if law.exact else k / n) * ws
            dev_formula = max(dev_formula, abs(fp - direct))
            dev_absorb = max(dev_absorb, abs(fp - absorbed[n]))
            if law.exact and n <= normalizer_max:
                dev_enum = max(dev_enum, abs(fp - enumerated_normalizer(law, k, n)))
    report.add(n_max, "max_dev_walk_formula", dev_formula)
    report.add(n_max, "max_dev_absorption", dev_absorb)
    report.add(normalizer_max, "max_dev_enumerated_normalizer", dev_enum)
    tol = 0 if law.exact else 1e-12
    report.criteria["formula_exact"] = dev_formula <= tol
    report.criteria["absorption_agrees"] = dev_absorb <= tol
    report.criteria["enumeration_agrees"] = dev_enum <= tol
    report.details["exact"] = law.exact
    for row in report.rows:
        if isinstance(row["value"], Fraction):
            row["value"] = str(row["value"])
    return report


def support_period(law: ReproductionLaw) -> int:
    """gcd of the differences between support points."""
    base = law.support[0]
    return math.gcd(*[v - base for v in law.support]) if len(law.support) > 1 else 0


def ratio_limit_check(law: ReproductionLaw, n_list, ell: int, tol: float = 0.1) -> ExperimentReport:
    """``P(S_n <= n - ell) / P(S_n <= n)`` along ``n_list`` from the exact convolution table."""
    m = law.mean
    if abs(float(m) - 1) > (0 if law.exact else FLOAT_TOL):
        raise HypothesisViolated(f"mean {float(m)} != 1: the ratio limit check needs a critical law")
    if support_period(law) != 1:
        raise PeriodicSupport(f"support {law.support} lies in a proper subgroup (period {support_period(law)})")
    n_list = [int(n) for n in n_list]
    report = ExperimentReport("ratio_limit", {"law": law.to_text(), "n": n_list, "ell": ell, "tol": tol})
    ratios = [exact.ratio_limit(law, n, ell) for n in n_list]
    for n, r in zip(n_list, ratios):
        report.add(n, "ratio", r)
    report.criteria["non_decreasing"] = all(b >= a for a, b in zip(ratios, ratios[1:]))
    report.criteria[f"|ratio-1|<={tol}_at_n={n_list[-1]}"] = abs(ratios[-1] - 1) <= tol
    return report


def tilt_check(law: ReproductionLaw, target: float, expected: dict | None = None) -> ExperimentReport:
    """Tilt to ``target``, tilt back, and tilt to the law's own mean."""
    tilted = exponential_tilt(law, target)
    back = exponential_tilt(tilted, float(law.mean))
    same = exponential_tilt(law, float(law.mean))
    report = ExperimentReport("tilt", {"law": law.to_text(), "target": target})
    report.details["tilted"] = {str(v): float(p) for v, p in zip(tilted.values, tilted.probs)}
    orig = {v: float(p) for v, p in zip(law.values, law.probs)}
    report.add(target, "tilted_mean", float(tilted.mean))
    rt = max(abs(float(back.pmf(v)) - p) for v, p in orig.items())
    ident = max(abs(float(same.pmf(v)) - p) for v, p in orig.items())
    report.add(target, "round_trip_max_dev", rt)
    report.add(target, "identity_max_dev", ident)
    report.criteria["mean_within_1e-10"] = abs(float(tilted.mean) - target) <= 1e-10
    report.criteria["same_support"] = tilted.support == law.support
    report.criteria["round_trip_within_1e-9"] = rt <= 1e-9
    report.criteria["identity_within_1e-12"] = ident <= 1e-12
    if expected is not None:
        dev = max(abs(float(tilted.pmf(v)) - float(p)) for v, p in expected.items())
        report.add(target, "expected_max_dev", dev)
        report.criteria["matches_expected_within_1e-9"] = dev <= 1e-9
    return report


def sizebias_check(law: ReproductionLaw) -> ExperimentReport:
    nu = size_biased(law)
    report = ExperimentReport("sizebias", {"law": law.to_text()})
    report.details["nu"] = nu.to_text()
    report.details["molloy_reed"] = str(molloy_reed_criterion(law))
    total = sum(nu.probs, Fraction(0) if nu.exact else 0.0)
    report.add(0, "nu_total_mass", str(total) if nu.exact else total)
    report.criteria["nu_sums_to_one"] = total == 1 if nu.exact else abs(total - 1) <= FLOAT_TOL
    return report
