"""Deterministic seed derivation for independent random streams.

All randomized steps in the package draw their seeds through
:func:`derive_seed`, which hashes a master seed together with a sequence of
string/integer parts. The hash is SHA-256 over a canonical encoding, so the
derived streams are stable across runs, platforms and Python versions
(unlike the built-in, salted ``hash``).
"""

from __future__ import annotations

import hashlib

_SEED_BITS = 63


def derive_seed(master_seed: int, *parts) -> int:
    """Derive a child seed from a master seed and a label path.

    Parts may be ints or strings; they are joined unambiguously before
    hashing, so ("ab", "c") and ("a", "bc") yield different seeds.
    """
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big") & ((1 << _SEED_BITS) - 1)
