"""Named sub-seeds derived from a single run seed."""

import zlib

import numpy as np


def sub_seed(seed: int, name: str) -> int:
    """Deterministic 64-bit seed for the component ``name``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(sub_seed(seed, name))
