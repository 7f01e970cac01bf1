"""Website-side logic: registration, login, migration, page serving.

The server is honest here but designed as if compromised tomorrow: it
never needs the plaintext password (credentials decrypt only inside the
enclave) and its database holds keyed tags useless without the SafeKey.
Unknown users cost the same enclave call as real ones, against a
pseudo-salt derived from the user id, so timing and rate-limit effects
don't reveal which accounts exist.
"""

from __future__ import annotations

import hmac
import secrets
from dataclasses import dataclass, field
from enum import Enum
from random import Random

from . import crypto
from .crypto import EncryptedCredential, PlainCredential
from .enclave import (
    DecryptError,
    Enclave,
    RateLimitedError,
    SALT_BYTES,
)
from .legacy import legacy_hash
from .records import PasswordRecord, RecordStore, Scheme


class DuplicateUserError(Exception):
    pass


class LoginResult(Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    THROTTLED = "throttled"


@dataclass
class MigrationReport:
    migrated: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class PageDescriptor:
    path: str
    html: str
    quote: bytes | None
    protected_fields: tuple[str, ...]


def pseudo_salt(user_id: str) -> bytes:
    """Deterministic stand-in salt for nonexistent accounts."""
    return crypto.sha256(user_id.encode())[:SALT_BYTES]


class AuthService:
    def __init__(
        self,
        enclave: Enclave,
        store: RecordStore,
        rng: Random | None = None,
    ):
        self._enclave = enclave
        self._store = store
        self._rng = rng

    @property
    def enclave(self) -> Enclave:
        return self._enclave

    @property
    def store(self) -> RecordStore:
        return self._store

    def _new_salt(self) -> bytes:
        if self._rng is None:
            return secrets.token_bytes(SALT_BYTES)
        return self._rng.randbytes(SALT_BYTES)

    def hash_password(self, data: bytes, salt: bytes) -> bytes:
        """Raw keyed-tag computation; data is whatever the scheme feeds
        the enclave (plaintext for new accounts, legacy hash for
        wrapped ones)."""
        return self._enclave.process(PlainCredential(data), salt)

    def register(
        self, user_id: str, credential: EncryptedCredential | PlainCredential
    ) -> PasswordRecord:
        if user_id in self._store:
            raise DuplicateUserError(user_id)
        salt = self._new_salt()
        tag = self._enclave.process(credential, salt)
        record = PasswordRecord(user_id, salt, tag, Scheme.SAFEKEEPER)
        self._store.put(record)
        return record

    def login(
        self, user_id: str, credential: EncryptedCredential | PlainCredential
    ) -> LoginResult:
        record = self._store.get(user_id)
        if record is None:
            # Same work as a real check; result is always a rejection.
            try:
                self._enclave.process(credential, pseudo_salt(user_id))
            except RateLimitedError:
                return LoginResult.THROTTLED
            except DecryptError:
                pass
            return LoginResult.REJECTED

        try:
            if record.scheme == Scheme.SAFEKEEPER:
                tag = self._enclave.process(credential, record.salt)
            elif record.scheme == Scheme.ONION:
                tag = self._process_onion(credential, record.salt)
            else:  # LEGACY_MD5: no enclave involved yet
                tag = self._legacy_only(credential, record.salt)
        except RateLimitedError:
            return LoginResult.THROTTLED
        except DecryptError:
            return LoginResult.REJECTED

        if hmac.compare_digest(tag, record.tag):
            if record.scheme == Scheme.LEGACY_MD5:
                self._upgrade_inline(record, tag)
            return LoginResult.ACCEPTED
        return LoginResult.REJECTED

    def _process_onion(
        self, credential: EncryptedCredential | PlainCredential, salt: bytes
    ) -> bytes:
        """Wrapped record: legacy digest first, then the keyed tag. For
        plaintext the server can run the legacy layer itself; encrypted
        passwords make the enclave do it after decryption."""
        if isinstance(credential, PlainCredential):
            inner = legacy_hash(credential.password, salt)
            return self._enclave.process(PlainCredential(inner), salt)
        return self._enclave.process(credential, salt, legacy_prehash=True)

    def _legacy_only(
        self, credential: EncryptedCredential | PlainCredential, salt: bytes
    ) -> bytes:
        if isinstance(credential, PlainCredential):
            return legacy_hash(credential.password, salt)
        # An encrypted credential can't be checked against a bare legacy
        # record without the enclave; wrap-migrate the database first.
        raise DecryptError("legacy record requires migration for encrypted login")

    def _upgrade_inline(self, record: PasswordRecord, legacy_tag: bytes) -> None:
        """Successful legacy login: wrap the proven hash immediately."""
        tag = self._enclave.process(PlainCredential(legacy_tag), record.salt)
        self._store.put(
            PasswordRecord(record.user_id, record.salt, tag, Scheme.ONION)
        )

    def migrate_database(self) -> MigrationReport:
        """Wrap every legacy hash through the enclave, no users involved.

        Attempts spent here are ordinary rate-limited calls; with the
        default budget that is one of 144 for each user's salt, which is
        why this runs as a one-shot batch.
        """
        report = MigrationReport()
        for record in self._store.all():
            if record.scheme != Scheme.LEGACY_MD5:
                report.skipped.append(record.user_id)
                continue
            tag = self._enclave.process(PlainCredential(record.tag), record.salt)
            self._store.put(
                PasswordRecord(record.user_id, record.salt, tag, Scheme.ONION)
            )
            report.migrated.append(record.user_id)
        return report

    # --- page serving ---

    def quote_or_none(self) -> bytes | None:
        try:
            return self._enclave.quote_bytes()
        except Exception:
            return None

    def serve_page(self, path: str, protected_fields: tuple[str, ...]) -> PageDescriptor:
        quote = self.quote_or_none()
        meta = ""
        if quote is not None and protected_fields:
            fields = ",".join(protected_fields)
            meta = f'<meta name="safekeeper" content="{fields}">\n'
        html = _page_html(path, meta, protected_fields)
        return PageDescriptor(path, html, quote, protected_fields)


def _page_html(path: str, meta: str, protected_fields: tuple[str, ...]) -> str:
    title = "Register" if "register" in path else "Sign in"
    action = "/api/register" if "register" in path else "/api/login"
    return f"""<!doctype html>
<html>
<head>
<meta charset="utf-8">
{meta}<title>{title}</title>
</head>
<body>
<h1>{title}</h1>
<form id="auth-form" action="{action}" method="post">
  <label>Username <input type="text" name="username" id="username"></label>
  <label>Password <input type="password" name="password" id="password"></label>
  <button type="submit">{title}</button>
</form>
</body>
</html>
"""
