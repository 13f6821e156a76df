"""Seeded randomness: Philox 4x64 counter-based generator, 64-bit keys.

``numpy.random.Philox`` produces the same stream on every platform, and
per-item seeds are derived by hashing so results never depend on the order
in which items are processed.
"""

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & SEED_MASK))


def derive_seed(global_seed: int, index: int) -> int:
    digest = hashlib.blake2b(f"{int(global_seed)}:{int(index)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")
