"""The grabbing particle system.

Particles carry arms; arms fire one at a time in a uniformly random order,
and each one grabs a uniformly chosen particle still lying on the axis,
excluding the root of the grabbing particle's own cluster.  The grabbed
particle's whole cluster hangs off the arm that grabbed it.

Particles are labeled ``1..n`` in every public structure.  Arm ``s`` of a
particle (``s = 1..x_i``) is its ``s``-th child slot from the left.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConditioningImpossible, InvalidArms, OutOfRange
from . import _kernels
from .forest import LabeledForest, PlanarForest, PlanarTree, ReproductionLaw
from .rng import GENERATOR_NAME, as_rng


@dataclass(frozen=True)
class ArmVector:
    """Initial arm counts ``x_1..x_n`` with ``x_1 + ... + x_n = n - k``."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(x) for x in self.counts)
        object.__setattr__(self, "counts", counts)
        if len(counts) < 2:
            raise InvalidArms(f"need at least 2 particles, got {len(counts)}")
        if min(counts) < 0:
            raise InvalidArms("arm counts must be nonnegative")
        if self.k < 1:
            raise InvalidArms(f"total arm count {sum(counts)} must be at most n - 1 = {len(counts) - 1}")

    @classmethod
    def parse(cls, text: str) -> "ArmVector":
        try:
            return cls(tuple(int(t) for t in text.replace(" ", "").split(",") if t != ""))
        except ValueError as exc:
            raise InvalidArms(f"bad arm vector {text!r}") from exc

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def k(self) -> int:
        return self.n - self.total

    def digest(self) -> str:
        return hashlib.sha256(",".join(map(str, self.counts)).encode()).hexdigest()[:16]

    def __str__(self):
        return ",".join(map(str, self.counts))


# ---------------------------------------------------------------------------
# dynamics


@dataclass(frozen=True)
class Trajectory:
    """Everything needed to rebuild the system at any time.

    ``axis_order`` lists particle labels left to right at time 0,
    ``activation[l]`` is the ``(particle, slot)`` fired at step ``l + 1`` and
    ``targets[l]`` the particle it grabbed.
    """

    arms: ArmVector
    axis_order: tuple[int, ...]
    activation: tuple[tuple[int, int], ...]
    targets: tuple[int, ...]

    @property
    def terminal(self) -> LabeledForest:
        return _build_terminal(self.arms, self.axis_order, self.activation, self.targets)

    def state_at(self, time: int) -> "SystemState":
        return state_at(self, time)


def _build_terminal(arms, axis_order, activation, targets):
    counts = arms.counts
    n = len(counts)
    child: dict[tuple[int, int], int] = {}
    edge_label = [0] * (n + 1)
    is_root = [True] * (n + 1)
    for step, ((p, s), g) in enumerate(zip(activation, targets), start=1):
        child[(p, s)] = g
        edge_label[g] = step
        is_root[g] = False
    trees, vlabels, elabels = [], [], []
    for root in axis_order:
        if not is_root[root]:
            continue
        seq = []
        stack = [root]
        while stack:
            v = stack.pop()
            seq.append(counts[v - 1])
            vlabels.append(v)
            if v != root:
                elabels.append(edge_label[v])
            for s in range(counts[v - 1], 0, -1):
                stack.append(child[(v, s)])
        trees.append(PlanarTree(tuple(seq)))
    shape = PlanarForest(tuple(trees))
    return LabeledForest(shape, tuple(vlabels), tuple(elabels))


def _draw_choices(arms: ArmVector, rng: np.random.Generator):
    """Axis order, arm firing order and root draws, in that stream order.

    ``draws[l]`` is uniform on ``0..n-l-2``: one index per step into the
    eligible roots (every root except the grabber's own).
    """
    n, total = arms.n, arms.total
    axis = rng.permutation(n)
    order = rng.permutation(total)
    highs = np.arange(n - 1, n - 1 - total, -1, dtype=np.int64)
    draws = rng.integers(0, highs) if total else np.zeros(0, dtype=np.int64)
    return axis, order, draws


@dataclass
class _Run:
    counts: np.ndarray
    offsets: np.ndarray
    axis: np.ndarray
    order: np.ndarray
    grabbed: np.ndarray

    @property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.counts)), self.counts)


def _run(arms: ArmVector, rng) -> _Run:
    rng = as_rng(rng)
    axis, order, draws = _draw_choices(arms, rng)
    counts = np.asarray(arms.counts, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    owner = np.repeat(np.arange(arms.n), counts)
    grabbed = _kernels.grab_loop(owner, order, draws, arms.n)
    return _Run(counts, offsets, axis, order, grabbed)


def _shape(run: _Run) -> tuple[PlanarForest, np.ndarray]:
    vertices, sizes = _kernels.dfs(run.counts, run.offsets, run.grabbed, run.axis)
    shape = PlanarForest._trusted(tuple(run.counts[vertices].tolist()), tuple(sizes.tolist()))
    return shape, vertices


def simulate_trajectory(arms: ArmVector, rng) -> Trajectory:
    """Run the dynamics once, keeping the full record of choices."""
    run = _run(arms, rng)
    owner = run.owner
    slots = np.arange(len(owner)) - run.offsets[owner]
    activation = tuple(zip((owner[run.order] + 1).tolist(), (slots[run.order] + 1).tolist()))
    targets = tuple((run.grabbed[run.order] + 1).tolist())
    return Trajectory(arms, tuple((run.axis + 1).tolist()), activation, targets)


def simulate_terminal(arms: ArmVector, rng) -> LabeledForest:
    """Terminal labeled forest of one run (full-fidelity mode)."""
    run = _run(arms, rng)
    shape, vertices = _shape(run)
    rank = np.empty_like(run.order)
    rank[run.order] = np.arange(1, len(run.order) + 1)
    edge_label = np.zeros(arms.n, dtype=np.int64)
    edge_label[run.grabbed] = rank
    roots = np.cumsum((0,) + shape.sizes[:-1])
    non_root = np.ones(arms.n, dtype=bool)
    non_root[roots] = False
    return LabeledForest(
        shape,
        tuple((vertices + 1).tolist()),
        tuple(edge_label[vertices[non_root]].tolist()),
        check=False,
    )


def simulate_shape(arms: ArmVector, rng) -> PlanarForest:
    """Terminal forest shape of one run, without label bookkeeping.

    Consumes the random stream exactly like :func:`simulate_terminal`, so
    for a given seed the result is the shape of the full-fidelity output.
    """
    return _shape(_run(arms, rng))[0]


def replay(
    arms: ArmVector,
    axis_order: Sequence[int],
    activation: Sequence[tuple[int, int]],
    targets: Sequence[int],
) -> Trajectory:
    """Build a trajectory from explicit choices, checking every rule."""
    n = arms.n
    if sorted(axis_order) != list(range(1, n + 1)):
        raise InvalidArms("axis order must be a permutation of 1..n")
    expected = sorted((p, s) for p in range(1, n + 1) for s in range(1, arms.counts[p - 1] + 1))
    if sorted(activation) != expected or len(activation) != len(expected):
        raise InvalidArms("activation must list every arm exactly once")
    if len(targets) != len(activation):
        raise InvalidArms("one target per activated arm is required")
    root_of = {p: p for p in range(1, n + 1)}
    on_axis = set(range(1, n + 1))
    for (p, _), g in zip(activation, targets):
        if g not in on_axis:
            raise InvalidArms(f"particle {g} is not on the axis")
        rp = root_of[p]
        if g == rp:
            raise InvalidArms(f"particle {p} cannot grab the root of its own cluster")
        on_axis.discard(g)
        for q, r in root_of.items():
            if r == g:
                root_of[q] = rp
    return Trajectory(arms, tuple(axis_order), tuple(map(tuple, activation)), tuple(targets))


# ---------------------------------------------------------------------------
# intermediate states


@dataclass(frozen=True)
class SystemState:
    """The system after ``time`` activations.

    ``roots`` are in left-to-right axis order and ``clusters[i]`` is the set
    of particles hanging below ``roots[i]``.  ``edges`` holds
    ``(label, parent, slot, child)`` sorted by label.
    """

    time: int
    roots: tuple[int, ...]
    clusters: tuple[frozenset, ...]
    remaining_arms: tuple[int, ...]
    edges: tuple[tuple[int, int, int, int], ...]

    @property
    def n(self) -> int:
        return len(self.remaining_arms)

    def cluster_of(self, particle: int) -> frozenset:
        for c in self.clusters:
            if particle in c:
                return c
        raise KeyError(particle)


def state_at(trajectory: Trajectory, time: int) -> SystemState:
    """Prune every edge labeled above ``time`` from the terminal state."""
    arms = trajectory.arms
    if not 0 <= time <= arms.total:
        raise OutOfRange(f"time {time} outside 0..{arms.total}")
    kept = [
        (label, p, s, g)
        for label, ((p, s), g) in enumerate(zip(trajectory.activation, trajectory.targets), start=1)
        if label <= time
    ]
    parent = {g: p for _, p, _, g in kept}
    remaining = list(arms.counts)
    for _, p, _, _ in kept:
        remaining[p - 1] -= 1

    def root(v):
        while v in parent:
            v = parent[v]
        return v

    members: dict[int, set] = {}
    for v in range(1, arms.n + 1):
        members.setdefault(root(v), set()).add(v)
    roots = tuple(v for v in trajectory.axis_order if v not in parent)
    return SystemState(
        time=time,
        roots=roots,
        clusters=tuple(frozenset(members[r]) for r in roots),
        remaining_arms=tuple(remaining),
        edges=tuple(kept),
    )


# ---------------------------------------------------------------------------
# random initial conditions


def sample_conditioned_arms(law: ReproductionLaw, n: int, rng, max_attempts: int = 10**6) -> ArmVector:
    """I.i.d. arm counts from ``law`` conditioned on ``k(n) >= 1``, by rejection."""
    return draw_conditioned_arms(law, n, rng, max_attempts)[0]


def draw_conditioned_arms(
    law: ReproductionLaw, n: int, rng, max_attempts: int = 10**6
) -> tuple[ArmVector, int]:
    """Like :func:`sample_conditioned_arms`, also returning the number of draws used."""
    rng = as_rng(rng)
    if n < 2:
        raise InvalidArms(f"need at least 2 particles, got {n}")
    if law.support[0] >= 1 and law.support[0] * n > n - 1:
        raise ConditioningImpossible(f"every draw has at least {law.support[0] * n} arms for {n} particles")
    rows = max(1, min(64, (1 << 21) // n))
    attempts = 0
    while attempts < max_attempts:
        batch = min(rows, max_attempts - attempts)
        draws = law.sample(rng, (batch, n))
        ok = np.flatnonzero(draws.sum(axis=1) <= n - 1)
        if ok.size:
            attempts += int(ok[0]) + 1
            return ArmVector(tuple(draws[ok[0]].tolist())), attempts
        attempts += batch
    raise ConditioningImpossible(f"no draw with k(n) >= 1 in {max_attempts} attempts")


# ---------------------------------------------------------------------------
# replica records


def replica_record(
    arms: ArmVector,
    result: LabeledForest | PlanarForest,
    seed: int,
    stream: int,
    elapsed_ns: int,
) -> dict:
    shape = result.shape if isinstance(result, LabeledForest) else result
    record = {
        "seed": seed,
        "stream": stream,
        "n": arms.n,
        "k": arms.k,
        "arms_digest": arms.digest(),
        "shape": shape.to_text(),
        "elapsed_ns": elapsed_ns,
    }
    if isinstance(result, LabeledForest):
        record["vertex_labels"] = list(result.vertex_labels)
        record["edge_labels"] = list(result.edge_labels)
    return record


def run_replica(arms: ArmVector, seed: int, stream: int, full: bool = False) -> dict:
    from .rng import make_rng

    rng = make_rng(seed, stream)
    start = time.perf_counter_ns()
    result = simulate_terminal(arms, rng) if full else simulate_shape(arms, rng)
    return replica_record(arms, result, seed, stream, time.perf_counter_ns() - start)


def dumps_record(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


__all__ = [
    "ArmVector",
    "GENERATOR_NAME",
    "SystemState",
    "Trajectory",
    "replay",
    "replica_record",
    "run_replica",
    "draw_conditioned_arms",
    "sample_conditioned_arms",
    "simulate_shape",
    "simulate_terminal",
    "simulate_trajectory",
    "state_at",
]
