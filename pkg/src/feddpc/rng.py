"""Seeded, independent random streams.

Every random decision in a run (partitioning, model init, client sampling,
minibatch shuffling) draws from its own Philox stream keyed by a seed plus
a purpose tag, so reordering or parallelising components never changes any
stream's output.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(seed: int, tags: tuple) -> list[int]:
    entropy = [int(seed) & _MASK64]
    for tag in tags:
        if isinstance(tag, str):
            entropy.append(zlib.crc32(tag.encode("utf-8")))
        else:
            entropy.append(int(tag) & _MASK64)
    return entropy


def stream(seed: int, *tags: str | int) -> np.random.Generator:
    """Return a Philox generator keyed by (seed, *tags).

    Philox is counter-based, so streams with different keys are independent
    and reproducible across platforms for a pinned numpy version.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_key(seed, tags))))


def derive_seed(seed: int, *tags: str | int) -> int:
    """Collapse (seed, *tags) into a single 64-bit seed for handing off."""
    state = np.random.SeedSequence(_key(seed, tags)).generate_state(2, np.uint32)
    return (int(state[0]) << 32) | int(state[1])
