"""Domain-separated random number streams.

Every stochastic stage derives its generator from the single user seed plus a
stage tag, so scheduling samples, out-of-sample validation draws, and
synthetic trace generation never share a stream. Generators are NumPy PCG64;
normals use NumPy's ziggurat transform. Both are pinned so fixtures stay
stable across builds.
"""

from __future__ import annotations

import numpy as np

SCHEDULING = 0x5C
VALIDATION = 0xA1
TRACE = 0x7E


def rng_for(seed: int, domain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(domain,)))
