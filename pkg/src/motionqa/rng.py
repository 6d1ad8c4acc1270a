"""Seeding contract shared by every randomized stage.

All randomness flows from 64-bit integer seeds through counter-based Philox
generators, so a (master_seed, sample_index) pair reproduces a sample
bit-exactly regardless of execution order or worker count.

Draw-order contract (one stream per sample, consumed in this fixed order):

1. volume pick        - 1 integer draw
2. slice selection    - isotropic volume: 1 integer draw for the axis,
                        then 1 integer draw for the slice index;
                        anisotropic volume: index draw only.
                        Each degenerate-slice retry repeats step 2.
3. contrast augment   - 1 integer draw for the kind, then the kind's
                        parameters in declaration order (disabled
                        augmentation consumes nothing).
4. corruption         - 1 integer draw for the algorithm, 1 for the
                        severity, then the algorithm's parameters in
                        declaration order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 mixing step (finalizer only, no state increment)."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix_seed(master_seed: int, index: int) -> int:
    """Derive the per-sample stream key: element `index` of the SplitMix64
    sequence seeded at `master_seed`."""
    if index < 0:
        raise ValueError(f"sample index must be >= 0, got {index}")
    return splitmix64((master_seed + (index + 1) * _GOLDEN) & _MASK64)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for a 64-bit key."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
