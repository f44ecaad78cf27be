"""Counter-based uniforms: draw ``k`` is a pure function of ``(seed, k)``.

Philox produces four 64-bit words per counter value, so reserving one counter
block per draw makes every draw index-addressable through ``advance``.
"""

from __future__ import annotations

import os

import numpy as np

DEFAULT_SEED = 20_130_521
SEED_ENV = "ZERO_ATLAS_SEED"
WORDS_PER_DRAW = 4


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else DEFAULT_SEED


def trial_seed(base_seed: int, i: int) -> int:
    return int(base_seed) ^ int(i)


def uniform_block(seed: int, count: int, start: int = 0) -> np.ndarray:
    """``(count, 4)`` array of uniforms in ``(0, 1)`` for draws ``start .. start+count-1``."""
    if count < 0 or start < 0:
        raise ValueError("count and start must be non-negative")
    bg = np.random.Philox(key=int(seed) & (2**64 - 1))
    if start:
        bg.advance(start)
    u = np.random.Generator(bg).random(WORDS_PER_DRAW * count)
    # shift off zero: random() lives on a 2**-53 lattice in [0, 1)
    u = u + 2.0**-54
    return u.reshape(count, WORDS_PER_DRAW)
