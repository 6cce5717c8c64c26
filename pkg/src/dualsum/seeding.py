"""Deterministic seed derivation.

One root seed per run is split into independent named streams by hashing
the label path, so inserting a new consumer never shifts the draws of an
existing one. Hashes go through SHA-256, which is stable across
platforms and Python versions (unlike ``hash()``).
"""

from __future__ import annotations

import hashlib
import random


def stable_seed(*parts: object) -> int:
    """64-bit seed derived from the string forms of ``parts``."""
    payload = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(*parts: object) -> random.Random:
    """Fresh ``random.Random`` seeded from a named stream."""
    return random.Random(stable_seed(*parts))
