import math
from fractions import Fraction as F

import pytest

from grabforest import (
    ArmVector,
    ExactLaw,
    Infeasible,
    TooLarge,
    enumerate_phi,
    enumerate_trees,
    exact_conditional_gw,
    exact_terminal_law,
    first_passage_pmf,
    parse_law,
)
from grabforest.forest import parse_forest_text
from grabforest.oracle import (
    enumerate_forests,
    exact_terminal_shape_law,
    mixture_terminal_shape_law,
    phi_cardinality,
)


@pytest.mark.parametrize(
    "counts, size",
    [((2, 0, 0), 4), ((0, 0), 2), ((1, 1, 0), 4), ((1, 0), 1), ((0, 0, 0), 6)],
)
def test_terminal_law_uniform_on_phi(counts, size):
    law = exact_terminal_law(ArmVector(counts))
    phi = {f.to_text() for f in enumerate_phi(ArmVector(counts))}
    assert len(law) == size == len(phi) == phi_cardinality(ArmVector(counts))
    assert set(law.support()) == phi
    assert set(law.outcomes.values()) == {F(1, size)}
    assert law.total() == 1


def test_terminal_law_too_large():
    with pytest.raises(TooLarge):
        exact_terminal_law(ArmVector((0,) * 9))
    with pytest.raises(TooLarge):
        enumerate_phi(ArmVector((0,) * 9))


def test_shape_marginal_collapse():
    arms = ArmVector((2, 1, 0, 0, 0))
    assert exact_terminal_shape_law(arms) == exact_terminal_law(arms).shape_marginal()


def test_conditional_gw_examples(binary):
    bits = parse_law("0:1/2,1:1/2", exact=True)
    assert exact_conditional_gw(bits, 1, 2).outcomes == {"(1,0)": 1}
    assert exact_conditional_gw(binary, 1, 3).outcomes == {"(2,0,0)": 1}
    assert exact_conditional_gw(binary, 2, 4).outcomes == {"(0|2,0,0)": F(1, 2), "(2,0,0|0)": F(1, 2)}


def test_conditional_gw_infeasible(binary):
    with pytest.raises(Infeasible):
        exact_conditional_gw(binary, 1, 4)


def test_conditional_gw_masses(ternary):
    for k, n in [(1, 5), (2, 6), (3, 7)]:
        law = exact_conditional_gw(ternary, k, n)
        assert law.total() == 1
        z = first_passage_pmf(ternary, k, n)
        for text, mass in law.outcomes.items():
            weight = F(1)
            for y in parse_forest_text(text).outdegrees:
                weight *= ternary.pmf(y)
            assert mass == weight / z


@pytest.mark.parametrize("k, n", [(1, 4), (2, 5), (1, 6), (3, 6)])
def test_mixture_equals_conditioned_gw(ternary, k, n):
    assert mixture_terminal_shape_law(ternary, k, n) == exact_conditional_gw(ternary, k, n)


def test_enumerate_trees_examples():
    assert [t.to_text() for t in enumerate_trees(1)] == ["(0)"]
    assert {t.to_text() for t in enumerate_trees(3)} == {"(0)", "(1,0)", "(2,0,0)", "(1,1,0)"}
    assert len(enumerate_trees(5)) == 23
    with pytest.raises(TooLarge):
        enumerate_trees(13)


def test_enumerate_trees_catalan():
    trees = enumerate_trees(9)
    for size in range(1, 10):
        catalan = math.comb(2 * (size - 1), size - 1) // size
        assert sum(t.size == size for t in trees) == catalan
    assert [t.size for t in trees] == sorted(t.size for t in trees)


def test_enumerate_forests_count():
    # plane forests with k trees and n vertices: (k/n) C(2n-k-1, n-1)
    for n in range(1, 8):
        for k in range(1, n + 1):
            assert len(enumerate_forests(n, k)) == k * math.comb(2 * n - k - 1, n - 1) // n


def test_exact_law_csv_round_trip(ternary):
    law = exact_conditional_gw(ternary, 2, 5)
    assert ExactLaw.from_csv(law.to_csv()) == law


def test_exact_law_rejects_floats():
    with pytest.raises(TypeError):
        ExactLaw({"(0)": 0.5})
