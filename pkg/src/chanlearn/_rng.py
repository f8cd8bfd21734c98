"""Seeded random streams, reproducible per (seed, tag, round).

Streams come from a counter-style keying of numpy's Philox generator: the key
is derived from the experiment seed, a short module tag, and an optional round
number.  Independent (seed, tag, round) triples give statistically independent
streams, so replicas and parallel trial ranges can be split without sharing
generator state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, tag: str = "main", round_index: int | None = None) -> np.random.Generator:
    """Generator keyed by (seed, tag, round)."""
    material = f"{int(seed)}|{tag}|{'' if round_index is None else int(round_index)}"
    key = int.from_bytes(hashlib.sha256(material.encode()).digest()[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))
