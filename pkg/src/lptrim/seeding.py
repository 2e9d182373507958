"""Deterministic seed derivation for independent work units.

Every random quantity in an experiment is drawn from a generator seeded by
``child_seed(master, *key)``, where the key names the work unit (for example
``("trial", 7)`` or ``("directions",)``).  Results are therefore independent
of execution order and of how work is split across processes.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["child_seed", "child_rng"]


def _key_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("seed key integers must be nonnegative")
        return int(part)
    digest = hashlib.blake2s(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def child_seed(master: int, *key) -> int:
    """A 64-bit seed token derived from the master seed and a work-unit key."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(_key_word(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def child_rng(master: int, *key) -> np.random.Generator:
    return np.random.default_rng(child_seed(master, *key))
