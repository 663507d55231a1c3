from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from grabforest import (
    InvalidSequence,
    LabeledForest,
    LukasiewiczWalk,
    NotNormalized,
    ParseError,
    PlanarForest,
    PlanarTree,
    ReproductionLaw,
    parse_forest,
    parse_forest_text,
    parse_law,
    parse_tree_text,
    shape_of,
    tree_probability,
)
from grabforest.gw import first_passage_pmf
from grabforest.oracle import enumerate_trees

SEVEN_LABELED = "(1,2,1,0,0|1,0);v=7,6,5,1,2,4,3;e=2,1,3,4,5"


# --- parse_forest


def test_parse_forest_seven_particle_terminal():
    f = parse_forest([1, 2, 1, 0, 0, 1, 0], 2)
    assert f.k == 2 and f.n == 7
    assert f.sizes == (5, 2)
    assert f.tree_texts() == ["(1,2,1,0,0)", "(1,0)"]


def test_parse_forest_cherry():
    f = parse_forest([2, 0, 0], 1)
    assert f.trees == (PlanarTree((2, 0, 0)),)
    assert f.trees[0].children() == [[1, 2], [], []]


def test_parse_forest_early_passage_reports_index():
    with pytest.raises(InvalidSequence) as err:
        parse_forest([0, 0], 1)
    assert err.value.index == 1


def test_parse_forest_rejects_bad_input():
    with pytest.raises(InvalidSequence):
        parse_forest([], 1)
    with pytest.raises(InvalidSequence):
        parse_forest([1, -1, 0], 1)
    with pytest.raises(InvalidSequence):
        parse_forest([1, 1], 1)  # never reaches -1


@st.composite
def forests(draw, max_trees=4, max_size=12):
    k = draw(st.integers(1, max_trees))
    trees = []
    for _ in range(k):
        size = draw(st.integers(1, max_size))
        # random plane tree: random sequence rotated by the cycle lemma
        seq = draw(st.lists(st.integers(0, 3), min_size=size, max_size=size))
        trees.append(_to_tree(seq))
    return PlanarForest(trees)


def _to_tree(seq):
    # adjust a sequence so that it sums to size - 1, then rotate to the valid shift
    seq = list(seq)
    n = len(seq)
    while sum(seq) > n - 1:
        i = max(range(n), key=lambda j: seq[j])
        seq[i] -= 1
    while sum(seq) < n - 1:
        seq[seq.index(min(seq))] += 1
    level, low, arg = 0, 0, 0
    for i, y in enumerate(seq):
        level += y - 1
        if level < low:
            low, arg = level, i + 1
    seq = seq[arg:] + seq[:arg]
    return PlanarTree(tuple(seq))


@given(forests())
def test_round_trip_sequence(f):
    assert parse_forest(list(f.outdegrees), f.k) == f


@given(forests())
def test_round_trip_text(f):
    text = f.to_text()
    assert parse_forest_text(text) == f
    assert parse_forest_text(text).to_text() == text


def test_text_is_whitespace_insensitive():
    assert parse_forest_text(" ( 1, 2,1,0 ,0 | 1,0 ) ").to_text() == "(1,2,1,0,0|1,0)"


@given(st.lists(st.integers(-1, 3), min_size=1, max_size=30))
def test_walk_is_skip_free(steps):
    walk = LukasiewiczWalk(tuple(steps))
    sums = walk.partial_sums
    assert sums[0] == 0
    # every level between 0 and the minimum is visited
    low = min(sums)
    seen = set(sums)
    assert all(level in seen for level in range(low, 1))


# --- tree_probability


def test_tree_probability_examples(binary, ternary):
    assert tree_probability(binary, PlanarTree((0,))) == F(1, 2)
    assert tree_probability(binary, PlanarTree((2, 0, 0))) == F(1, 8)
    assert tree_probability(ternary, PlanarTree((1, 1, 0))) == F(1, 32)


def test_tree_probability_outside_support(binary):
    assert tree_probability(binary, PlanarTree((1, 0))) == 0


@pytest.mark.parametrize("S", range(1, 9))
def test_tree_masses_sum_to_first_passage_cdf(ternary, S):
    total = sum((tree_probability(ternary, t) for t in enumerate_trees(S)), F(0))
    assert total == sum(first_passage_pmf(ternary, 1, s) for s in range(1, S + 1))


@given(forests(max_trees=3, max_size=6))
@settings(max_examples=50)
def test_tree_probability_is_multiplicative(f):
    law = ReproductionLaw.from_mapping({0: F(1, 3), 1: F(1, 3), 2: F(1, 6), 3: F(1, 6)})
    prod = F(1)
    for t in f.trees:
        prod *= tree_probability(law, t)
    assert tree_probability(law, f) == prod


# --- shape_of and labeled forests


def test_shape_of_seven_particle_state():
    labeled = LabeledForest.from_text(SEVEN_LABELED)
    assert shape_of(labeled) == parse_forest([1, 2, 1, 0, 0, 1, 0], 2)
    assert labeled.outdegree_of() == {7: 1, 6: 2, 5: 1, 1: 0, 2: 0, 4: 1, 3: 0}


def test_shape_of_isolated_roots():
    labeled = LabeledForest(PlanarForest([PlanarTree((0,))] * 4), (3, 1, 4, 2), ())
    assert shape_of(labeled).to_text() == "(0|0|0|0)"


def test_shape_of_ignores_relabeling():
    labeled = LabeledForest.from_text(SEVEN_LABELED)
    vperm = {i: 8 - i for i in range(1, 8)}
    eperm = {i: 6 - i for i in range(1, 6)}
    assert shape_of(labeled.relabel(vperm, eperm)) == shape_of(labeled)


def test_labeled_forest_validation():
    shape = parse_forest([1, 0], 1)
    with pytest.raises(ValueError):
        LabeledForest(shape, (1, 1), (1,))
    with pytest.raises(ValueError):
        LabeledForest(shape, (1, 2), (2,))


def test_labeled_forest_text_round_trip():
    assert LabeledForest.from_text(SEVEN_LABELED).to_text() == SEVEN_LABELED


# --- laws


def test_parse_law_float_and_rational():
    law = parse_law("0:0.5,2:0.5")
    assert law.values == (0, 2) and law.probs == (0.5, 0.5)
    exact = parse_law("0:1/2,2:1/2", exact=True)
    assert exact.probs == (F(1, 2), F(1, 2)) and exact.exact


def test_parse_law_errors():
    with pytest.raises(NotNormalized):
        parse_law("0:0.5,2:0.6")
    with pytest.raises(NotNormalized):
        parse_law("0:1/2,2:1/3", exact=True)
    with pytest.raises(ParseError) as err:
        parse_law("0:0.5,x:0.5")
    assert err.value.position is not None


def test_law_drops_zero_entries_and_sorts():
    law = ReproductionLaw.from_mapping({2: F(1, 2), 1: F(0), 0: F(1, 2)})
    assert law.values == (0, 2)
    assert law.mean == 1 and law.criticality == "critical"


def test_parse_tree_text():
    assert parse_tree_text("(0)").size == 1
    with pytest.raises(InvalidSequence):
        parse_tree_text("(0,0)")
