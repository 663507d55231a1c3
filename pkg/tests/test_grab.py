from collections import Counter
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grabforest import (
    ArmVector,
    ConditioningImpossible,
    InvalidArms,
    OutOfRange,
    ReproductionLaw,
    make_rng,
    parse_law,
    replay,
    sample_conditioned_arms,
    simulate_shape,
    simulate_terminal,
    simulate_trajectory,
    state_at,
)
from grabforest import _kernels
from grabforest.grab import dumps_record, run_replica
from grabforest.harness import chi_square_test
from grabforest.oracle import enumerate_phi, exact_terminal_law

SEVEN = dict(
    arms=ArmVector((0, 0, 0, 1, 1, 2, 1)),
    axis_order=(3, 5, 2, 6, 1, 7, 4),
    activation=[(6, 1), (7, 1), (5, 1), (6, 2), (4, 1)],
    targets=[5, 6, 1, 2, 3],
)


def test_arm_vector_validation():
    assert ArmVector((2, 0, 0)).k == 1
    with pytest.raises(InvalidArms):
        ArmVector((1, 1))  # k = 0
    with pytest.raises(InvalidArms):
        ArmVector((0,))


def test_single_arm_is_deterministic():
    for seed in range(5):
        f = simulate_terminal(ArmVector((1, 0)), make_rng(seed))
        assert f.shape.to_text() == "(1,0)"
        assert f.vertex_labels == (1, 2) and f.edge_labels == (1,)


def test_isolated_particles_uniform_axis_order():
    counts = Counter(simulate_terminal(ArmVector((0, 0, 0)), make_rng(1, i)).to_text() for i in range(6000))
    assert len(counts) == 6
    _, p = chi_square_test(counts, {key: 1 / 6 for key in counts})
    assert p > 1e-3


@pytest.mark.parametrize("counts", [(2, 0, 0), (1, 1, 0), (1, 1, 0, 0), (2, 0, 1, 0)])
def test_terminal_frequencies_match_exact_law(counts):
    arms = ArmVector(counts)
    law = exact_terminal_law(arms)
    rng = make_rng(7, sum(counts))
    reps = 20000
    obs = Counter(simulate_terminal(arms, rng).to_text() for _ in range(reps))
    assert set(obs) <= set(law.support())
    _, p = chi_square_test(obs, {key: float(v) for key, v in law.outcomes.items()}, reps)
    assert p > 1e-3


def test_two_zero_zero_has_four_equally_likely_states():
    law = exact_terminal_law(ArmVector((2, 0, 0)))
    assert len(law) == 4 and set(law.outcomes.values()) == {F(1, 4)}


@st.composite
def arm_vectors(draw, n_max=12):
    n = draw(st.integers(2, n_max))
    total = draw(st.integers(0, n - 1))
    cuts = sorted(draw(st.lists(st.integers(0, total), min_size=n - 1, max_size=n - 1)))
    counts = [b - a for a, b in zip([0] + cuts, cuts + [total])]
    return ArmVector(tuple(counts))


@given(arm_vectors(), st.integers(0, 2**32))
@settings(max_examples=100)
def test_terminal_structure(arms, seed):
    f = simulate_terminal(arms, make_rng(seed))
    assert f.k == arms.k and f.n == arms.n
    assert sorted(f.edge_labels) == list(range(1, arms.total + 1))
    assert sorted(f.vertex_labels) == list(range(1, arms.n + 1))
    out = f.outdegree_of()
    assert all(out[i] == arms.counts[i - 1] for i in range(1, arms.n + 1))
    children = [child for _, child, _, _ in f.edges()]
    assert len(children) == len(set(children)) == arms.total


@given(arm_vectors(), st.integers(0, 2**32))
@settings(max_examples=60)
def test_trajectory_consistency(arms, seed):
    traj = simulate_trajectory(arms, make_rng(seed))
    assert traj.terminal == simulate_terminal(arms, make_rng(seed))
    assert simulate_shape(arms, make_rng(seed)) == traj.terminal.shape
    replay(arms, traj.axis_order, traj.activation, traj.targets)  # obeys every rule
    for t in range(arms.total + 1):
        s = state_at(traj, t)
        assert len(s.roots) == arms.n - t and len(s.edges) == t
        assert sum(s.remaining_arms) == arms.total - t
        # fired edges carry smaller labels than any arm still inactive
        assert all(label <= t for label, _, _, _ in s.edges)
        assert sorted(v for c in s.clusters for v in c) == list(range(1, arms.n + 1))
        assert all(r in c for r, c in zip(s.roots, s.clusters))


def test_seven_particle_terminal_state():
    traj = replay(**SEVEN)
    assert traj.terminal.to_text() == "(1,2,1,0,0|1,0);v=7,6,5,1,2,4,3;e=2,1,3,4,5"


def test_seven_particle_first_step():
    s = state_at(replay(**SEVEN), 1)
    assert s.cluster_of(5) == frozenset({5, 6})
    assert s.edges == ((1, 6, 1, 5),)
    assert sorted(len(c) for c in s.clusters) == [1, 1, 1, 1, 1, 2]


def test_state_at_endpoints():
    traj = replay(**SEVEN)
    start = state_at(traj, 0)
    assert start.edges == () and start.remaining_arms == SEVEN["arms"].counts
    assert start.roots == SEVEN["axis_order"]
    end = state_at(traj, 5)
    assert end.roots == (7, 4) and end.remaining_arms == (0,) * 7
    with pytest.raises(OutOfRange):
        state_at(traj, 6)
    with pytest.raises(OutOfRange):
        state_at(traj, -1)


def test_replay_rejects_illegal_grabs():
    bad = dict(SEVEN, targets=[5, 6, 6, 2, 3])  # 6 is no longer on the axis
    with pytest.raises(InvalidArms):
        replay(**bad)
    with pytest.raises(InvalidArms):
        replay(ArmVector((1, 0)), (1, 2), [(1, 1)], [1])  # own root


def test_determinism():
    arms = ArmVector((3, 0, 1, 0, 2, 0, 0, 1, 0, 0))
    assert simulate_terminal(arms, make_rng(11)) == simulate_terminal(arms, make_rng(11))
    a = dumps_record(run_replica(arms, 5, 3, full=True) | {"elapsed_ns": 0})
    b = dumps_record(run_replica(arms, 5, 3, full=True) | {"elapsed_ns": 0})
    assert a == b


def test_replica_record_schema():
    rec = run_replica(ArmVector((2, 0, 0)), 1, 0)
    assert set(rec) == {"seed", "stream", "n", "k", "arms_digest", "shape", "elapsed_ns"}
    full = run_replica(ArmVector((2, 0, 0)), 1, 0, full=True)
    assert {"vertex_labels", "edge_labels"} <= set(full)


# --- conditioned arms


def test_conditioned_arms_delta_zero():
    law = ReproductionLaw.delta(0)
    arms = sample_conditioned_arms(law, 6, make_rng(0))
    assert arms.counts == (0,) * 6 and arms.k == 6


def test_conditioned_arms_binary_two_particles(binary):
    rng = make_rng(2)
    assert {sample_conditioned_arms(binary, 2, rng).counts for _ in range(200)} == {(0, 0)}


def test_conditioned_arms_impossible():
    with pytest.raises(ConditioningImpossible):
        sample_conditioned_arms(ReproductionLaw.delta(1), 5, make_rng(0))
    with pytest.raises(ConditioningImpossible):
        sample_conditioned_arms(parse_law("1:0.999999,0:0.000001"), 50, make_rng(0), max_attempts=1000)


def test_conditioned_arms_law(ternary):
    # P(x | sum <= n - 1) on n = 3, checked by enumeration
    rng = make_rng(3)
    reps = 20000
    obs = Counter(sample_conditioned_arms(ternary, 3, rng).counts for _ in range(reps))
    weights = {}
    for x in np.ndindex(3, 3, 3):
        if sum(x) <= 2:
            w = 1.0
            for v in x:
                w *= float(ternary.pmf(v))
            weights[tuple(int(v) for v in x)] = w
    total = sum(weights.values())
    _, p = chi_square_test(obs, {x: w / total for x, w in weights.items()}, reps)
    assert p > 1e-3


# --- compiled kernels


@given(arm_vectors(n_max=30), st.integers(0, 2**32))
@settings(max_examples=80)
def test_kernels_match_python(arms, seed):
    rng = make_rng(seed)
    n, total = arms.n, arms.total
    counts = np.asarray(arms.counts, dtype=np.int64)
    owner = np.repeat(np.arange(n), counts)
    order = rng.permutation(total)
    draws = rng.integers(0, np.arange(n - 1, n - 1 - total, -1)) if total else np.zeros(0, dtype=np.int64)
    axis = rng.permutation(n)
    g1 = _kernels.grab_loop(owner, order, draws, n)
    g2 = _kernels.grab_loop_py(owner, order, draws, n)
    assert np.array_equal(g1, g2)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    v1, s1 = _kernels.dfs(counts, offsets, g1, axis)
    v2, s2 = _kernels.dfs_py(counts, offsets, g2, axis)
    assert np.array_equal(v1, v2) and np.array_equal(s1, s2)
