"""Seed derivation for independent, reproducible random streams.

A master seed and a text label determine a stream:
``SeedSequence([master, tag(label)])`` where ``tag`` is the first eight bytes of
the SHA-256 digest of the label read as a little-endian integer.  Adding a new
label never changes the streams of existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def label_tag(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


def seed_sequence(master: int, label: str, *index: int) -> np.random.SeedSequence:
    """Seed for stream ``label``; ``index`` (e.g. an instance number) selects a child stream."""
    if not 0 <= int(master) <= MASK64:
        raise ValueError(f"master seed must be an unsigned 64-bit integer, got {master!r}")
    return np.random.SeedSequence([int(master), label_tag(label)], spawn_key=tuple(int(i) for i in index))


def stream(master: int, label: str, *index: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master, label, *index))


def as_generator(seed) -> np.random.Generator:
    """Accept an int, a ``SeedSequence`` or a ``Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
