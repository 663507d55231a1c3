"""Seeded random streams.

Every random source in the package is a numpy ``Generator`` over PCG64,
keyed by ``(seed, stream)`` through ``SeedSequence`` spawn keys, so replica
``i`` of a run always sees the same numbers whatever the worker layout.
"""

import numpy as np

GENERATOR_NAME = "numpy.random.PCG64 (SeedSequence(seed, spawn_key=(stream,)))"


def make_rng(seed: int, stream: int | tuple[int, ...] = 0) -> np.random.Generator:
    """Generator for ``(seed, stream)``; ``stream`` may be a tuple path."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    key = tuple(stream) if isinstance(stream, tuple) else (stream,)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def rng_metadata(seed: int, stream: int | None = None) -> dict:
    meta = {"generator": GENERATOR_NAME, "numpy": np.__version__, "seed": seed}
    if stream is not None:
        meta["stream"] = list(stream) if isinstance(stream, tuple) else stream
    return meta


def as_rng(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return make_rng(int(rng))
    raise TypeError(f"expected a numpy Generator or an integer seed, got {type(rng).__name__}")
