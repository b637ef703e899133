"""
Named random substreams derived from one master seed.

Each process that needs randomness (AR innovations, design draws, regression
noise, randomization variables, Wiener paths, ...) asks for its own named
stream. Names map to a stable spawn key, so a stream never depends on how
many other streams were requested before it.
"""
import zlib
from typing import List, Sequence, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    """Coerce an int / SeedSequence into a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        # Draw fresh entropy from the generator so derived streams stay reproducible
        return np.random.SeedSequence(int(seed.integers(0, 2**63 - 1)))
    if seed is None:
        return np.random.SeedSequence()
    return np.random.SeedSequence(int(seed))


def child_sequence(seed: SeedLike, name: str) -> np.random.SeedSequence:
    parent = seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=parent.entropy,
        spawn_key=tuple(parent.spawn_key) + (_name_key(name),),
    )


def substream(seed: SeedLike, name: str) -> np.random.Generator:
    """Generator for the named substream of ``seed``."""
    return np.random.Generator(np.random.PCG64DXSM(child_sequence(seed, name)))


def as_generator(seed: SeedLike, name: str = "default") -> np.random.Generator:
    """Accept either a ready Generator or a seed and return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return substream(seed, name)


def replication_seeds(seed: SeedLike, name: str, reps: int) -> List[np.random.SeedSequence]:
    """One independent SeedSequence per replication, in replication order."""
    return child_sequence(seed, name).spawn(reps)


def indexed_substream(seed: SeedLike, name: str, index: Sequence[int]) -> np.random.Generator:
    """Substream keyed by a name plus integer coordinates (e.g. a dyadic node)."""
    parent = child_sequence(seed, name)
    seq = np.random.SeedSequence(
        entropy=parent.entropy,
        spawn_key=tuple(parent.spawn_key) + tuple(int(i) & 0xFFFFFFFF for i in index),
    )
    return np.random.Generator(np.random.PCG64DXSM(seq))
