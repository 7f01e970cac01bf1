"""Legacy password scheme kept for migration: iterated salted MD5.

One initial md5(salt || password) followed by 255 rounds of
md5(state || password), 256 digest computations total. Databases built
on this scheme are wrapped (hash fed through the keyed tag) rather than
re-hashed from plaintext.
"""

from __future__ import annotations

import hashlib

LEGACY_ROUNDS = 256


def legacy_hash(password: bytes, salt: bytes) -> bytes:
    state = hashlib.md5(salt + password).digest()
    for _ in range(LEGACY_ROUNDS - 1):
        state = hashlib.md5(state + password).digest()
    return state
