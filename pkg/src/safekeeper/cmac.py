"""AES-128-CMAC.

The tag over a message is the last block of a single AES-CBC pass (zero
IV) after the final block has been masked with a derived subkey: K1 for
a complete final block, K2 plus 10* padding otherwise. Subkeys come
from doubling AES(K, 0^16) in GF(2^128) with the 0x87 reduction.

Doing this as one CBC encryption instead of block-at-a-time keeps
per-call overhead low enough for the throughput targets.
"""

from __future__ import annotations

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

BLOCK = 16
_MASK = (1 << 128) - 1


def _double(block: bytes) -> bytes:
    value = int.from_bytes(block, "big") << 1
    if block[0] & 0x80:
        value ^= 0x87
    return (value & _MASK).to_bytes(BLOCK, "big")


class AesCmac:
    """Reusable CMAC context for one 128-bit key."""

    def __init__(self, key: bytes):
        if len(key) != BLOCK:
            raise ValueError("key must be 16 bytes")
        self._cbc = Cipher(algorithms.AES(key), modes.CBC(bytes(BLOCK)))
        ecb = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
        l = ecb.update(bytes(BLOCK)) + ecb.finalize()
        self._k1 = _double(l)
        self._k2 = _double(self._k1)

    def tag(self, message: bytes) -> bytes:
        if message and len(message) % BLOCK == 0:
            subkey = self._k1
            padded = bytearray(message)
        else:
            subkey = self._k2
            padded = bytearray(message) + b"\x80"
            padded += bytes(-len(padded) % BLOCK)
        for i in range(BLOCK):
            padded[-BLOCK + i] ^= subkey[i]
        enc = self._cbc.encryptor()
        out = enc.update(bytes(padded)) + enc.finalize()
        return out[-BLOCK:]


def aes_cmac(key: bytes, message: bytes) -> bytes:
    return AesCmac(key).tag(message)
