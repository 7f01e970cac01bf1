"""The password-hardening enclave.

Holds a 128-bit SafeKey that never leaves the trusted boundary and
answers exactly one question: CMAC(SafeKey, password || salt), at most
`attempts_max` times per salt per window. All host-facing entry points
(init / process / reset_attempts / shutdown) serialize on one lock.

Persistence is a sealed blob bound to (platform, measurement). Restores
are validated against the platform monotonic counter and the trusted
time nonce; any mismatch costs the host the maximum penalty: every
known salt drops to zero remaining attempts and the window restarts
from now. Rolling back therefore never earns an attacker extra guesses.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

from . import codec, crypto
from .cmac import AesCmac
from .legacy import legacy_hash
from .crypto import EncryptedCredential, PlainCredential
from .platform import PlatformSealError, VirtualTeePlatform

SALT_BYTES = 8
TAG_BYTES = 16
SEALED_VERSION = 0x01

DEFAULT_CODE_IDENTITY = "safekeeper-enclave/1.0.0"


class EnclaveError(Exception):
    pass


class UnsealError(EnclaveError):
    """Sealed state failed platform checks or is malformed."""


class RateLimitedError(EnclaveError):
    """No attempts remain for this salt in the current window."""


class DecryptError(EnclaveError):
    """Encrypted credential failed authentication. The attempt is spent."""


class SaltLengthError(EnclaveError):
    pass


class EnclaveClosedError(EnclaveError):
    """Handle was shut down."""


class EnclaveRevokedError(EnclaveError):
    """This enclave saw itself in a revocation statement and halted."""


@dataclass(frozen=True)
class EnclaveConfig:
    attempts_max: int = 144
    window_seconds: int = 86400


def measurement_of(code_identity: str) -> bytes:
    return crypto.sha256(b"enclave-code:" + code_identity.encode())


class Enclave:
    """Use `Enclave.init(...)`, not the constructor."""

    def __init__(self, *_args, **_kwargs):
        raise TypeError("use Enclave.init()")

    @classmethod
    def init(
        cls,
        platform: VirtualTeePlatform,
        config: EnclaveConfig = EnclaveConfig(),
        sealed: bytes | None = None,
        code_identity: str = DEFAULT_CODE_IDENTITY,
    ) -> "Enclave":
        """Launch. With `sealed`, restore prior state if and only if the
        blob passes freshness checks; a stale or tampered blob that still
        decrypts yields the penalty state instead of old counters.
        """
        self = object.__new__(cls)
        self._platform = platform
        self._measurement = measurement_of(code_identity)
        self._attempts_max = int(config.attempts_max)
        self._window = int(config.window_seconds)
        if self._attempts_max < 0 or self._window <= 0:
            raise ValueError("bad config")
        self._lock = threading.RLock()
        self._closed = False
        self._revoked = False
        self._revocation_check: Callable[[], bool] | None = None
        self._quote: bytes | None = None

        # Counter bump happens before anything else so a crash mid-init
        # still invalidates the previous sealed blob.
        self._boot_counter = platform.increment_counter()
        now, nonce = platform.trusted_time()

        if sealed is None:
            self._fresh_state(now, nonce)
            return self

        state = self._parse_sealed(sealed)
        (
            safe_key,
            dh_scalar,
            sign_scalar,
            attempts_max,
            window,
            t_reset,
            sealed_nonce,
            sealed_counter,
            sealed_lockout,
            attempts,
        ) = state
        self._safe_key = safe_key
        self._cmac = AesCmac(safe_key)
        self._dh_private = crypto.ec_private_from_scalar(dh_scalar)
        self._sign_private = crypto.ec_private_from_scalar(sign_scalar)
        if sealed_counter + 1 == self._boot_counter and sealed_nonce == nonce:
            # Clean restore. Config in force now wins over sealed config.
            self._t_reset = t_reset
            self._time_nonce = sealed_nonce
            self._lockout = sealed_lockout
            self._attempts = {
                s: min(a, self._attempts_max) for s, a in attempts.items()
            }
        else:
            # Replayed blob or time-source reset: keep the key, assume
            # the worst about what was guessed in the gap. The lockout
            # covers salts the blob has never even seen; otherwise a
            # pristine early blob would be a refill coupon.
            self._t_reset = now + self._window
            self._time_nonce = nonce
            self._lockout = True
            self._attempts = {s: 0 for s in attempts}
        return self

    def _fresh_state(self, now: int, nonce: bytes) -> None:
        self._safe_key = self._platform.random_bytes(16)
        self._cmac = AesCmac(self._safe_key)
        rng = _PlatformRandom(self._platform)
        self._dh_private = crypto.generate_private_key(rng)
        self._sign_private = crypto.generate_private_key(rng)
        self._attempts: dict[int, int] = {}
        self._t_reset = now + self._window
        self._time_nonce = nonce
        self._lockout = False

    def _parse_sealed(self, sealed: bytes):
        if not sealed or sealed[0] != SEALED_VERSION:
            raise UnsealError("unknown sealed format version")
        try:
            payload = self._platform.unseal(self._measurement, sealed[1:])
        except PlatformSealError as exc:
            raise UnsealError(str(exc)) from exc
        try:
            fields = codec.read_fields(payload, 10)
            safe_key = fields[0]
            dh_scalar = fields[1]
            sign_scalar = fields[2]
            attempts_max = codec.read_u32(fields[3])
            window = codec.read_u64(fields[4])
            t_reset = codec.read_u64(fields[5])
            nonce = fields[6]
            counter = codec.read_u64(fields[7])
            lockout_field = fields[8]
            table = fields[9]
            if len(safe_key) != 16 or len(nonce) != 16 or len(lockout_field) != 1:
                raise ValueError("bad field width")
            lockout = lockout_field != b"\x00"
            count = codec.read_u32(table[:4])
            if len(table) != 4 + 12 * count:
                raise ValueError("bad attempts table length")
            attempts: dict[int, int] = {}
            for i in range(count):
                off = 4 + 12 * i
                salt = int.from_bytes(table[off : off + 8], "big")
                attempts[salt] = int.from_bytes(table[off + 8 : off + 12], "big")
        except ValueError as exc:
            raise UnsealError(f"malformed sealed payload: {exc}") from exc
        return (
            safe_key,
            dh_scalar,
            sign_scalar,
            attempts_max,
            window,
            t_reset,
            nonce,
            counter,
            lockout,
            attempts,
        )

    # --- host-facing calls ---

    def process(
        self,
        credential: PlainCredential | EncryptedCredential,
        salt: bytes,
        legacy_prehash: bool = False,
    ) -> bytes:
        """One rate-limited tag computation.

        The attempt is charged before the credential is examined, so a
        garbage ciphertext costs the caller the same as a wrong guess.
        With legacy_prehash the decrypted password first runs through
        the legacy iterated-MD5 scheme (wrapped-hash records).
        """
        with self._lock:
            self._ensure_usable()
            if len(salt) != SALT_BYTES:
                raise SaltLengthError(f"salt must be {SALT_BYTES} bytes")
            if self._lockout:
                raise RateLimitedError("penalty window in force for all salts")
            slot = int.from_bytes(salt, "big")
            remaining = self._attempts.get(slot)
            if remaining is None:
                remaining = self._attempts_max
            if remaining <= 0:
                self._attempts[slot] = 0
                raise RateLimitedError("attempt budget exhausted for salt")
            self._attempts[slot] = remaining - 1

            if isinstance(credential, PlainCredential):
                password = credential.password
            elif isinstance(credential, EncryptedCredential):
                key = crypto.derive_shared_key(
                    self._dh_private,
                    credential.client_public_key,
                    crypto.SESSION_LABEL,
                )
                try:
                    password = crypto.aead_open(
                        key,
                        credential.nonce,
                        credential.ciphertext,
                        credential.client_public_key,
                    )
                except crypto.AeadError as exc:
                    raise DecryptError("credential did not authenticate") from exc
            else:
                raise TypeError("unsupported credential type")

            if legacy_prehash:
                password = legacy_hash(password, salt)
            return self._cmac.tag(password + salt)

    def reset_attempts(self) -> None:
        """Window bookkeeping; the host calls this, the enclave decides.

        Also the point where the enclave checks the revocation registry
        for its own identity and, if found, halts for good.
        """
        with self._lock:
            if self._closed:
                raise EnclaveClosedError("enclave is shut down")
            if self._revoked:
                return
            if self._revocation_check is not None and self._revocation_check():
                self._revoked = True
                return
            now, nonce = self._platform.trusted_time()
            if nonce != self._time_nonce:
                for slot in self._attempts:
                    self._attempts[slot] = 0
                self._lockout = True
                self._t_reset = now + self._window
                self._time_nonce = nonce
                return
            if now >= self._t_reset:
                for slot in self._attempts:
                    self._attempts[slot] = self._attempts_max
                self._lockout = False
                while self._t_reset <= now:
                    self._t_reset += self._window

    def shutdown(self) -> bytes:
        """Seal current state and retire this handle."""
        with self._lock:
            self._ensure_usable()
            payload = codec.write_fields(
                self._safe_key,
                crypto.ec_scalar_bytes(self._dh_private),
                crypto.ec_scalar_bytes(self._sign_private),
                codec.u32(self._attempts_max),
                codec.u64(self._window),
                codec.u64(self._t_reset),
                self._time_nonce,
                codec.u64(self._boot_counter),
                b"\x01" if self._lockout else b"\x00",
                self._attempts_table(),
            )
            blob = bytes([SEALED_VERSION]) + self._platform.seal(
                self._measurement, payload
            )
            self._closed = True
            return blob

    def _attempts_table(self) -> bytes:
        out = bytearray(codec.u32(len(self._attempts)))
        for slot in sorted(self._attempts):
            out += slot.to_bytes(8, "big")
            out += self._attempts[slot].to_bytes(4, "big")
        return bytes(out)

    def _ensure_usable(self) -> None:
        if self._closed:
            raise EnclaveClosedError("enclave is shut down")
        if self._revoked:
            raise EnclaveRevokedError("enclave halted after self-revocation check")

    # --- read-only surface ---

    @property
    def measurement(self) -> bytes:
        return self._measurement

    @property
    def dh_public_key(self) -> bytes:
        return crypto.public_bytes(self._dh_private)

    @property
    def signing_public_key(self) -> bytes:
        return crypto.public_bytes(self._sign_private)

    @property
    def boot_counter(self) -> int:
        return self._boot_counter

    @property
    def attempts_max(self) -> int:
        return self._attempts_max

    @property
    def window_seconds(self) -> int:
        return self._window

    @property
    def next_reset_at(self) -> int:
        return self._t_reset

    @property
    def halted(self) -> bool:
        return self._revoked

    @property
    def closed(self) -> bool:
        return self._closed

    def remaining_attempts(self, salt: bytes) -> int:
        """The host can count failures anyway, so exposing this loses
        nothing and saves scenarios from guessing."""
        if len(salt) != SALT_BYTES:
            raise SaltLengthError(f"salt must be {SALT_BYTES} bytes")
        with self._lock:
            if self._lockout:
                return 0
            return self._attempts.get(int.from_bytes(salt, "big"), self._attempts_max)

    def tracked_salt_count(self) -> int:
        with self._lock:
            return len(self._attempts)

    def quote_bytes(self) -> bytes:
        """Attestation quote binding this boot's DH public key. Issued
        once and reused; callers get identical bytes every time."""
        with self._lock:
            self._ensure_usable()
            if self._quote is None:
                self._quote = self._platform.issue_quote(
                    self._measurement, self.dh_public_key
                )
            return self._quote

    # --- trusted-side hooks used by the replication protocol ---
    # These model logic that runs inside the enclave; host code never
    # calls them directly.

    def set_revocation_check(self, check: Callable[[], bool]) -> None:
        self._revocation_check = check

    def sign_inside(self, message: bytes) -> bytes:
        with self._lock:
            self._ensure_usable()
            return crypto.sign(self._sign_private, message)

    def peer_seal(self, peer_dh_public: bytes, plaintext: bytes, aad: bytes):
        with self._lock:
            self._ensure_usable()
            key = crypto.derive_shared_key(
                self._dh_private, peer_dh_public, crypto.REPLICATION_LABEL
            )
            nonce = self._platform.random_bytes(crypto.NONCE_BYTES)
            return nonce, crypto.aead_seal(key, nonce, plaintext, aad)

    def peer_open(
        self, peer_dh_public: bytes, nonce: bytes, ciphertext: bytes, aad: bytes
    ) -> bytes:
        with self._lock:
            self._ensure_usable()
            key = crypto.derive_shared_key(
                self._dh_private, peer_dh_public, crypto.REPLICATION_LABEL
            )
            try:
                return crypto.aead_open(key, nonce, ciphertext, aad)
            except crypto.AeadError as exc:
                raise DecryptError("peer envelope did not authenticate") from exc

    def adopt_safe_key_inside(self, key: bytes) -> None:
        if len(key) != 16:
            raise ValueError("SafeKey must be 16 bytes")
        with self._lock:
            self._ensure_usable()
            self._safe_key = key
            self._cmac = AesCmac(key)

    def set_enforced_rate_inside(self, rate: int) -> None:
        if rate < 0:
            raise ValueError("rate must be non-negative")
        with self._lock:
            self._ensure_usable()
            if rate < self._attempts_max:
                for slot, remaining in self._attempts.items():
                    if remaining > rate:
                        self._attempts[slot] = rate
            self._attempts_max = rate

    def halt_inside(self) -> None:
        with self._lock:
            self._revoked = True


class _PlatformRandom:
    """Adapter so key generation draws scalars from platform entropy."""

    def __init__(self, platform: VirtualTeePlatform):
        self._platform = platform

    def randrange(self, lo: int, hi: int) -> int:
        span = hi - lo
        nbytes = (span.bit_length() + 7) // 8 + 8
        while True:
            v = int.from_bytes(self._platform.random_bytes(nbytes), "big") % span
            return lo + v

    def randbytes(self, n: int) -> bytes:
        return self._platform.random_bytes(n)
