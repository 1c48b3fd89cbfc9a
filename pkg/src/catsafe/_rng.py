"""Counter-based random streams.

Every source of randomness in the package is a Philox generator keyed by
(seed, *path), where path elements name the consumer (e.g. a category and a
resample index). Streams are independent of each other and of the order in
which they are created, so results do not depend on worker count, category
count, or evaluation order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _path_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"stream path parts must be int or str, got {type(part).__name__}")


def stream(seed: int, *path) -> np.random.Generator:
    """Return the generator for the (seed, *path) stream.

    The same (seed, path) always yields an identical, freshly positioned
    generator; distinct paths yield statistically independent streams.
    """
    words = [int(seed) & _MASK64] + [_path_word(p) for p in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
