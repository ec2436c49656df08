"""Counter-based uniforms: draw ``i`` of a stream depends only on ``(seed, i)``.

Philox emits four 64-bit words per counter step, so any window of the
stream can be regenerated without producing the prefix.  Shot ``k`` of a
run that consumes ``w`` draws per shot reads positions ``k*w .. k*w + w-1``.
"""

from __future__ import annotations

import numpy as np

_WORDS_PER_BLOCK = 4


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    if seed < 0 or start < 0 or count < 0:
        raise ValueError("seed, start and count must be nonnegative")
    block, skip = divmod(start, _WORDS_PER_BLOCK)
    bits = np.random.Philox(key=seed, counter=block).random_raw(count + skip)[skip:]
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def shot_uniforms(seed: int, shots: int, per_shot: int, first_shot: int = 0) -> np.ndarray:
    """``(shots, per_shot)`` array; row ``k`` belongs to shot ``first_shot + k``."""
    flat = uniforms(seed, first_shot * per_shot, shots * per_shot)
    return flat.reshape(shots, per_shot)
