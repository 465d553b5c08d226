"""Order-independent seed derivation.

Every random draw in the package comes from a Philox counter-based generator
keyed by a 64-bit seed.  Child seeds are a BLAKE2b digest of the parent seed
and a tuple of identifying parts, so the stream for (dataset, split, instance)
does not depend on how many other streams were consumed before it.
"""
from __future__ import annotations

import hashlib

import numpy as np

RNG_SCHEME = "philox4x64/blake2b-64/v1"

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *parts) -> int:
    """Return a 64-bit child seed for ``seed`` and the identifying ``parts``."""
    payload = "\x1f".join([str(int(seed) & _MASK64), *map(str, parts)])
    digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed: int, *parts) -> np.random.Generator:
    if parts:
        seed = derive_seed(seed, *parts)
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))
