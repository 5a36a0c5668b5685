"""Deterministic named random streams.

Every random draw in an experiment comes from a counter-based generator
(Philox) keyed by (master seed, stream name), so a single integer seed fixes
every recorded number and distinct streams never overlap. Stream owners are
single-threaded; two consumers never share a generator.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream_generator(master_seed: int, name: str) -> np.random.Generator:
    """Return the generator for stream `name` under `master_seed`."""
    key = np.array([np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), np.uint64(_name_key(name))])
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(master_seed: int, label: str) -> int:
    """Child seed for a sub-experiment (e.g. one sweep point)."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFFFFFFFFFFFFFF


class SeedHub:
    """Hands out per-purpose generators derived from one master seed."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)

    def stream(self, name: str) -> np.random.Generator:
        return stream_generator(self.master_seed, name)

    def child(self, label: str) -> "SeedHub":
        return SeedHub(derive_seed(self.master_seed, label))
