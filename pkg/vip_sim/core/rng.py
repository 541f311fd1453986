"""Reproducible random substreams.

Every random draw in the package comes from a generator returned by
:func:`substream`, keyed by ``(master seed, stage name, index)``. Streams
for different stages or indices are statistically independent, and the
same key always yields the same stream, so a result never depends on how
many workers consumed the indices or in which order.
"""

import hashlib

import numpy as np

from vip_sim.errors import DomainError

MAX_SEED = 2**64 - 1


def stage_key(stage: str) -> int:
    """Stable 32-bit key for a stage name (``hash()`` is salted per process)."""
    return int.from_bytes(hashlib.blake2b(stage.encode("utf-8"), digest_size=4).digest(), "little")


def seed_sequence(master_seed: int, stage: str, index: int = 0) -> np.random.SeedSequence:
    if not 0 <= master_seed <= MAX_SEED:
        raise DomainError(f"Master seed must be an unsigned 64-bit integer, got {master_seed}")
    if index < 0:
        raise DomainError(f"Substream index must be non-negative, got {index}")
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(stage_key(stage), index))


def substream(master_seed: int, stage: str, index: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator for one ``(stage, index)`` slot."""
    return np.random.Generator(np.random.Philox(seed_sequence(master_seed, stage, index)))


__all__ = ["MAX_SEED", "stage_key", "seed_sequence", "substream"]
