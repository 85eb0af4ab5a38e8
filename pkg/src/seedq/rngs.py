"""Named, splittable random streams derived from one master seed.

Every stochastic component draws from its own named stream so that results
are reproducible and independent of how work is split across workers:
streams are keyed by (master seed, concern name, optional trial index),
never by worker identity.
"""

import hashlib

import numpy as np


def _key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(master, *scope) -> np.random.SeedSequence:
    """SeedSequence for a named scope, e.g. seed_sequence(7, "cascade", trial)."""
    keys = [_key(s) if isinstance(s, str) else int(s) for s in scope]
    return np.random.SeedSequence([int(master) & 0xFFFFFFFF, *keys])


def stream(master, *scope) -> np.random.Generator:
    """Independent Generator for a named scope of the master seed."""
    return np.random.default_rng(seed_sequence(master, *scope))
