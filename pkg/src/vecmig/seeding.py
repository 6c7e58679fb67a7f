"""Deterministic named random streams.

Each consumer (mobility, attacks, malicious behavior, network init,
exploration, ...) gets its own sub-seed derived by hashing
``"{master_seed}:{name}"`` with SHA-256.  The construction is
splittable: adding or removing a consumer never shifts any other
consumer's stream, and the same master seed always yields the same
sub-seed map.
"""

from __future__ import annotations

import hashlib

import numpy as np

STREAM_NAMES = (
    "layout",
    "mobility",
    "attacks",
    "malicious",
    "network_init",
    "exploration",
    "agent_sizes",
    "evaluation",
)


def derive_seed(master_seed: int, name: str) -> int:
    """A 63-bit sub-seed for ``name``, independent of all other names."""
    digest = hashlib.sha256(f"{master_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def seed_streams(master_seed: int, names: tuple[str, ...] = STREAM_NAMES) -> dict[str, int]:
    """Sub-seed map for the standard consumers."""
    return {name: derive_seed(master_seed, name) for name in names}


def generator(master_seed: int, name: str) -> np.random.Generator:
    """A fresh PCG64 generator on the named stream."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, name)))
