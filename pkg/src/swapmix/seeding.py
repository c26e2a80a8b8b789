"""Deterministic sub-seed derivation.

All randomness in the toolkit flows from a single 64-bit run seed. Work
units (a question, a context object, an epoch) derive their own stream by
hashing the run seed together with stable string keys, so results do not
depend on processing order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_seed(*parts: object) -> int:
    """Hash the parts into a 64-bit seed, stable across platforms and runs."""
    digest = hashlib.blake2b(digest_size=8)
    for part in parts:
        digest.update(str(part).encode("utf-8"))
        digest.update(b"\x1f")
    return int.from_bytes(digest.digest(), "little")


def rng_from(*parts: object) -> np.random.Generator:
    """Generator seeded from ``stable_seed`` over the parts."""
    return np.random.Generator(np.random.PCG64(stable_seed(*parts)))
