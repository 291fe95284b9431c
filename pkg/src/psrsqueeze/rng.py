"""Counter-based random streams keyed by (seed, *coordinates).

Every stream is a Philox generator whose key derives only from the seed and
the caller's coordinates, so results do not depend on evaluation order or on
how work is split across threads.
"""

import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_word(k) -> int:
    if isinstance(k, (float, np.floating)):
        # float coordinates are keyed by their exact bit pattern
        return struct.unpack("<Q", struct.pack("<d", float(k) + 0.0))[0]
    return int(k) & _MASK64


def stream(seed: int, *keys) -> np.random.Generator:
    # spawn_key, unlike an entropy list, distinguishes trailing zero keys
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(_key_word(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
