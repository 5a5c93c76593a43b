"""Named, splittable random streams built on the Philox counter-based generator.

Every source of randomness in a run is keyed by (seed, stream name[, round]),
so that runs sharing a seed consume identical arm sets, preference uniforms
and delay draws regardless of which policy is acting (common random numbers).
"""

from __future__ import annotations

import numpy as np

_STREAM_CODES = {
    "theta": 0,  # environment ground-truth parameter
    "arms": 1,   # per-round arm sets
    "pref": 2,   # Bernoulli preference noise
    "delay": 3,  # feedback delay draws
    "init": 4,   # network weight initialisation
}

_MASK64 = (1 << 64) - 1


def substream(seed: int, stream: str, *extra: int) -> np.random.Generator:
    """Independent generator for one (seed, stream[, extra...]) key."""
    try:
        code = _STREAM_CODES[stream]
    except KeyError:
        raise ValueError(f"unknown stream name: {stream!r}") from None
    entropy = [int(seed) & _MASK64, code] + [int(e) & _MASK64 for e in extra]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
