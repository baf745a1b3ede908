"""Counter-based random number streams, splittable by sample index.

Every Monte Carlo sample in this package draws from its own Philox stream
keyed by (master_seed, sample_index).  Streams are independent by construction,
so work can be distributed over sample indices in any order, on any number of
workers, and the results are identical to a serial run.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def sample_stream(master_seed: int, sample_index: int) -> np.random.Generator:
    """Generator for one sample: Philox keyed by (master_seed, sample_index)."""
    if sample_index < 0:
        raise ValueError(f"sample_index must be >= 0, got {sample_index}")
    key = np.array(
        [int(master_seed) & _MASK64, int(sample_index) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


def substream(master_seed: int, sample_index: int, tag: int) -> np.random.Generator:
    """A further split (e.g. bootstrap draws) that cannot collide with sample streams.

    The tag is folded into the high bits of the index word, which keeps the
    (seed, index) keys of plain sample streams disjoint from tagged ones for
    any index below 2**48.
    """
    if not 0 < tag < (1 << 15):
        raise ValueError(f"tag must be in (0, 32768), got {tag}")
    folded = (int(tag) << 48) ^ (int(sample_index) & ((1 << 48) - 1))
    return sample_stream(master_seed, folded)
