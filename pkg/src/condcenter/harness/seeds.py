"""Per-replication seeds derived from a master seed.

A replication's seed depends only on ``(master, stream, index)``, never on
scheduling, so serial and parallel runs draw identical random numbers.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# stream tags keep the coupling draw independent of the chains
STREAM_CHAINS = 0
STREAM_COUPLING = 1
STREAM_META = 2


def splitmix64(x: int) -> int:
    """One output of the SplitMix64 generator whose state is ``x``."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed


def derive_seed(master: int, index: int, stream: int = STREAM_CHAINS) -> int:
    """``splitmix64(splitmix64(master ^ stream-tag) + index)``."""
    check_seed(master)
    if index < 0:
        raise ValueError("index must be nonnegative")
    base = splitmix64(master ^ ((stream * GOLDEN_GAMMA) & MASK64))
    return splitmix64((base + index) & MASK64)


def replication_seed(master: int, index: int) -> int:
    return derive_seed(master, index, STREAM_CHAINS)


def coupling_seed(master: int) -> int:
    return derive_seed(master, 0, STREAM_COUPLING)
