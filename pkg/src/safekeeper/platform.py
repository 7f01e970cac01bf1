"""Virtual TEE platform.

Models the hardware services an enclave relies on: entropy, sealing
bound to (platform, measurement), a monotonic counter, trusted time
stamped with a boot-epoch nonce, and quoting. Scenario code plays the
adversary by calling the same handles the "untrusted OS" would control:
resetting the time source, cloning sealed blobs, withholding counter
increments by restoring stale blobs.
"""

from __future__ import annotations

import secrets
import threading
from pathlib import Path
from random import Random

from . import codec, crypto
from .clock import Clock, WallClock


class PlatformSealError(Exception):
    """Sealed input rejected: wrong platform, measurement, or corrupt."""


class VirtualTeePlatform:
    def __init__(
        self,
        clock: Clock | None = None,
        rng: Random | None = None,
        quoting_authority=None,
        counter_start: int = 0,
        state_path: "str | Path | None" = None,
    ):
        self._clock = clock if clock is not None else WallClock()
        self._rng = rng
        self._authority = quoting_authority
        self._lock = threading.Lock()
        # state_path makes one virtual machine outlive the process: the
        # file stands in for the fused secret and NVRAM counter, which
        # real hardware keeps across reboots. It is host-trusted state,
        # not part of the rollback-attack surface (that is the sealed
        # blob, which stays protected by the counter+nonce checks).
        self._state_path = Path(state_path) if state_path is not None else None
        if self._state_path is not None and self._state_path.exists():
            secret, pid, nonce, counter = codec.read_fields(
                self._state_path.read_bytes(), 4
            )
            self._secret = secret
            self.platform_id = pid
            self._time_nonce = nonce
            self._counter = codec.read_u64(counter)
        else:
            self._counter = int(counter_start)
            self._secret = self.random_bytes(32)
            self.platform_id = self.random_bytes(16)
            self._time_nonce = self.random_bytes(16)
            self._write_state()

    def _write_state(self) -> None:
        if self._state_path is None:
            return
        data = codec.write_fields(
            self._secret, self.platform_id, self._time_nonce, codec.u64(self._counter)
        )
        tmp = self._state_path.with_name(self._state_path.name + ".tmp")
        tmp.write_bytes(data)
        tmp.replace(self._state_path)

    def random_bytes(self, n: int) -> bytes:
        if self._rng is None:
            return secrets.token_bytes(n)
        return self._rng.randbytes(n)

    # --- monotonic counter ---

    def read_counter(self) -> int:
        with self._lock:
            return self._counter

    def increment_counter(self) -> int:
        with self._lock:
            self._counter += 1
            self._write_state()
            return self._counter

    # --- trusted time ---

    def trusted_time(self) -> tuple[int, bytes]:
        """Current instant plus the nonce of the current time epoch."""
        return self._clock.now(), self._time_nonce

    def reset_time_source(self) -> None:
        """Adversary action: power-cycle the time source. New nonce."""
        self._time_nonce = self.random_bytes(16)
        self._write_state()

    # --- sealing ---

    def _seal_key(self, measurement: bytes) -> bytes:
        return crypto.sha256(crypto.SEAL_LABEL + self._secret + measurement)[:16]

    def seal(self, measurement: bytes, payload: bytes) -> bytes:
        nonce = self.random_bytes(crypto.NONCE_BYTES)
        ct = crypto.aead_seal(self._seal_key(measurement), nonce, payload, measurement)
        return nonce + ct

    def unseal(self, measurement: bytes, blob: bytes) -> bytes:
        if len(blob) < crypto.NONCE_BYTES + 16:
            raise PlatformSealError("sealed blob too short")
        nonce, ct = blob[: crypto.NONCE_BYTES], blob[crypto.NONCE_BYTES :]
        try:
            return crypto.aead_open(self._seal_key(measurement), nonce, ct, measurement)
        except crypto.AeadError as exc:
            raise PlatformSealError("sealed blob rejected") from exc

    # --- quoting ---

    def attach_authority(self, authority) -> None:
        self._authority = authority

    def issue_quote(self, measurement: bytes, bound_key: bytes) -> bytes:
        if self._authority is None:
            raise RuntimeError("platform has no quoting authority attached")
        return self._authority.issue(measurement, bound_key, self.platform_id)
