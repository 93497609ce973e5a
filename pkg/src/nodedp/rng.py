"""Deterministic random substreams.

A single 64-bit master seed plus a tuple of tags (experiment name, trial
index, purpose, ...) identifies an independent stream.  The same
(master_seed, tags) always yields the same stream, independent of how many
other streams were derived, which makes trials safe to run in any order or
in parallel.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(repr(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(master_seed: int, *tags) -> np.random.Generator:
    """Independent generator for (master_seed, *tags)."""
    key = tuple(_tag_to_int(t) for t in tags)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))
