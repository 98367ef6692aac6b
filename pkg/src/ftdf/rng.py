"""Deterministic seed derivation.

A single master seed fans out to per-purpose seeds. The derivation is
documented and stable across platforms and runs: the master seed and a scope
path (strings/ints such as ("tree", 7) or ("synth", "ramp", 12)) are joined
into a text key and hashed with SHA-256; the first 8 bytes (big-endian) form
the derived 64-bit seed. Scopes never collide with each other in practice and
changing any scope element changes the stream.
"""

import hashlib

import numpy as np


def derive_seed(master_seed, *scope):
    key = ":".join([str(int(master_seed))] + [str(s) for s in scope])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(master_seed, *scope):
    """A numpy Generator seeded from (master_seed, scope)."""
    return np.random.default_rng(derive_seed(master_seed, *scope))
