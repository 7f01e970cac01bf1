"""TEE-backed password hardening: rate-limited keyed hashing, remote
attestation with an untrusted caching proxy, end-to-end encrypted
credential submission, and replicated key holders with a global
guessing-rate budget.

Everything runs against a virtual platform (no hardware required); the
`harness` CLI replays attack scenarios and the `server` CLI exposes the
HTTP surface.
"""

from .clock import SimClock, WallClock
from .cmac import aes_cmac
from .enclave import (
    DecryptError,
    Enclave,
    EnclaveClosedError,
    EnclaveConfig,
    EnclaveError,
    EnclaveRevokedError,
    EncryptedCredential,
    PlainCredential,
    RateLimitedError,
    SaltLengthError,
    UnsealError,
)
from .platform import VirtualTeePlatform

__all__ = [
    "DecryptError",
    "Enclave",
    "EnclaveClosedError",
    "EnclaveConfig",
    "EnclaveError",
    "EnclaveRevokedError",
    "EncryptedCredential",
    "PlainCredential",
    "RateLimitedError",
    "SaltLengthError",
    "SimClock",
    "UnsealError",
    "VirtualTeePlatform",
    "WallClock",
    "aes_cmac",
]
