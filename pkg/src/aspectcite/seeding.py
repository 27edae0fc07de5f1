"""Named deterministic random streams derived from a single root seed.

Every stochastic component (splitting, parameter init, Gumbel noise,
negative sampling, ...) pulls its generator from `substream`, so any one
of them can be reproduced in isolation without replaying the others.
"""

import numpy as np

__all__ = ["substream"]


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a generator keyed by (seed, name), stable across runs and platforms.

    The stream name is folded into the seed material byte by byte; renaming a
    stream changes its draws, reordering calls to other streams does not.
    """
    if seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed}")
    material = [seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF, *name.encode("utf-8")]
    return np.random.default_rng(np.random.SeedSequence(material))
