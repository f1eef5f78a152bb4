"""Counter-based random streams keyed by (seed, purpose, index).

Every independent unit of Monte Carlo work (a block of trials, a dephasing
realization) gets its own Philox stream derived from the user seed and its
index, so results do not depend on how the work is scheduled.
"""
import zlib

from numpy.random import Generator, Philox, SeedSequence


def stream(seed: int, purpose: str, index: int) -> Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    tag = zlib.crc32(purpose.encode())
    return Generator(Philox(SeedSequence(seed, spawn_key=(tag, index))))


def derive_seed(seed: int, purpose: str, index: int) -> int:
    """Independent 63-bit seed for sub-run ``index`` (e.g. one row of a sweep)."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    tag = zlib.crc32(purpose.encode())
    state = SeedSequence(seed, spawn_key=(tag, index)).generate_state(1, dtype="uint64")[0]
    return int(state >> 1)
