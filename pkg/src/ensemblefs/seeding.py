import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed from a master seed and a path of tags.

    Independent of call order and thread scheduling, so parallel and serial
    execution draw identical streams.
    """
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(_key(p) for p in parts))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
