"""Shared crypto primitives.

One curve (NIST P-256) covers both key agreement and signatures so that
a browser client can do everything through WebCrypto. Conventions:

- public keys: 65-byte uncompressed SEC1 points
- signatures: 64-byte raw r||s (P1363), SHA-256 digest
- session keys: HKDF-SHA256 over the ECDH shared secret, empty salt,
  context label as info, 16-byte output
- field encryption: AES-128-GCM, 12-byte nonce, ciphertext||tag, with
  the sender's ephemeral public key as associated data
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from functools import lru_cache
from random import Random

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

CURVE = ec.SECP256R1()
# Group order of P-256; private scalars are drawn from [1, ORDER).
P256_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551

SESSION_LABEL = b"safekeeper-v1-session"
REPLICATION_LABEL = b"safekeeper-v1-replication"
SEAL_LABEL = b"safekeeper-v1-seal"

KEY_BYTES = 16
NONCE_BYTES = 12
PUBLIC_KEY_BYTES = 65
SIGNATURE_BYTES = 64


def sha256(data: bytes) -> bytes:
    digest = hashes.Hash(hashes.SHA256())
    digest.update(data)
    return digest.finalize()


def generate_private_key(rng: Random | None = None) -> ec.EllipticCurvePrivateKey:
    """P-256 keypair; a seeded Random makes the scalar deterministic."""
    if rng is None:
        scalar = secrets.randbelow(P256_ORDER - 1) + 1
    else:
        scalar = rng.randrange(1, P256_ORDER)
    return ec.derive_private_key(scalar, CURVE)


def ec_scalar_bytes(key: ec.EllipticCurvePrivateKey) -> bytes:
    return key.private_numbers().private_value.to_bytes(32, "big")


def ec_private_from_scalar(scalar: bytes) -> ec.EllipticCurvePrivateKey:
    value = int.from_bytes(scalar, "big")
    if not 1 <= value < P256_ORDER:
        raise ValueError("scalar out of range")
    return ec.derive_private_key(value, CURVE)


def public_bytes(key: ec.EllipticCurvePrivateKey | ec.EllipticCurvePublicKey) -> bytes:
    public = key.public_key() if isinstance(key, ec.EllipticCurvePrivateKey) else key
    return public.public_bytes(
        serialization.Encoding.X962, serialization.PublicFormat.UncompressedPoint
    )


def load_public_key(data: bytes) -> ec.EllipticCurvePublicKey:
    if len(data) != PUBLIC_KEY_BYTES:
        raise ValueError("public key must be a 65-byte uncompressed point")
    return ec.EllipticCurvePublicKey.from_encoded_point(CURVE, data)


def sign(key: ec.EllipticCurvePrivateKey, message: bytes) -> bytes:
    der = key.sign(message, ec.ECDSA(hashes.SHA256()))
    r, s = decode_dss_signature(der)
    return r.to_bytes(32, "big") + s.to_bytes(32, "big")


@lru_cache(maxsize=8192)
def verify(public_key_bytes: bytes, message: bytes, signature: bytes) -> bool:
    # Pure function of its inputs; the cache exists because roster
    # validation re-checks identical (key, payload, sig) triples a lot.
    if len(signature) != SIGNATURE_BYTES:
        return False
    try:
        key = load_public_key(public_key_bytes)
    except ValueError:
        return False
    r = int.from_bytes(signature[:32], "big")
    s = int.from_bytes(signature[32:], "big")
    try:
        key.verify(encode_dss_signature(r, s), message, ec.ECDSA(hashes.SHA256()))
        return True
    except InvalidSignature:
        return False


def derive_shared_key(
    private: ec.EllipticCurvePrivateKey, peer_public: bytes, label: bytes
) -> bytes:
    shared = private.exchange(ec.ECDH(), load_public_key(peer_public))
    return HKDF(
        algorithm=hashes.SHA256(), length=KEY_BYTES, salt=None, info=label
    ).derive(shared)


def aead_seal(key: bytes, nonce: bytes, plaintext: bytes, aad: bytes) -> bytes:
    return AESGCM(key).encrypt(nonce, plaintext, aad)


def aead_open(key: bytes, nonce: bytes, ciphertext: bytes, aad: bytes) -> bytes:
    """Raises AeadError on any authentication failure."""
    try:
        return AESGCM(key).decrypt(nonce, ciphertext, aad)
    except InvalidTag as exc:
        raise AeadError("ciphertext failed authentication") from exc


class AeadError(Exception):
    pass


def random_nonce(rng: Random | None = None) -> bytes:
    if rng is None:
        return secrets.token_bytes(NONCE_BYTES)
    return rng.randbytes(NONCE_BYTES)


@dataclass(frozen=True)
class PlainCredential:
    """Password bytes handed to the enclave by a caller it trusts."""

    password: bytes


@dataclass(frozen=True)
class EncryptedCredential:
    """Password encrypted under a client-to-enclave session key.

    client_public_key is the client's ephemeral DH point; it doubles as
    the AEAD associated data so a swapped key breaks decryption.
    """

    client_public_key: bytes
    nonce: bytes
    ciphertext: bytes


def encrypt_credential(
    session_key: bytes,
    client_public_key: bytes,
    password: bytes,
    rng: Random | None = None,
) -> EncryptedCredential:
    nonce = random_nonce(rng)
    ct = aead_seal(session_key, nonce, password, client_public_key)
    return EncryptedCredential(client_public_key, nonce, ct)
