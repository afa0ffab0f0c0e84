"""Seed splitting: every random stream is derived from one master seed."""

from __future__ import annotations

import hashlib

import numpy as np


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)) and key >= 0:
        return int(key)
    digest = hashlib.blake2b(repr(key).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(seed, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``.

    ``seed`` may be an int, a ``SeedSequence``, or a tuple ``(seed, *keys)``.  Streams with
    different key paths never collide, so results do not depend on the order
    in which stages or workers draw.
    """
    if isinstance(seed, tuple):
        return derive_rng(seed[0], *seed[1:], *keys)
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(_key_int(k) for k in keys))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2**63))
