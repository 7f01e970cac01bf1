"""What a client (or browser extension) runs before trusting a page.

The client arrives with two pinned facts: the verifier's root public
key and a whitelist of acceptable enclave measurements. From the
server's response it takes the quote and a verification report, checks
the report's certificate chain and signature, matches report to quote,
matches quote to the DH key the page wants credentials encrypted to,
and only then opens an encrypted channel. Nothing the server, network,
or proxy did along the way needs to be trusted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from random import Random

from . import crypto
from .attestation import (
    REPORT_KEY_ROLE,
    AttestationReport,
    Quote,
    Verdict,
)
from .crypto import EncryptedCredential


class VerificationError(Exception):
    pass


class SignatureError(VerificationError):
    """A signature, certificate, or binding between artifacts is bad."""


class Revoked(VerificationError):
    """The verifier says this platform is on the revocation list."""


class UntrustedMeasurement(VerificationError):
    """Valid attestation, but not code the whitelist accepts."""


class KeyBindingMismatch(VerificationError):
    """The offered DH key is not the one inside the quote."""


@dataclass(frozen=True)
class Whitelist:
    version: int
    measurements: frozenset[bytes]

    def allows(self, measurement: bytes) -> bool:
        return measurement in self.measurements


@dataclass(frozen=True)
class ClientConfig:
    """Distribution bundle: whitelist plus pinned verifier root key."""

    whitelist: Whitelist
    ias_root_public_key: bytes

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": self.whitelist.version,
                "measurements": sorted(
                    m.hex() for m in self.whitelist.measurements
                ),
                "ias_root_public_key": self.ias_root_public_key.hex(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ClientConfig":
        raw = json.loads(text)
        return cls(
            whitelist=Whitelist(
                version=int(raw["version"]),
                measurements=frozenset(
                    bytes.fromhex(m) for m in raw["measurements"]
                ),
            ),
            ias_root_public_key=bytes.fromhex(raw["ias_root_public_key"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "ClientConfig":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class VerifiedEnclave:
    measurement: bytes
    enclave_public_key: bytes
    report: AttestationReport


def verify_and_bind(
    quote_bytes: bytes,
    report_bytes: bytes,
    whitelist: Whitelist,
    enclave_dh_public_key: bytes,
    *,
    ias_root_public_key: bytes,
) -> VerifiedEnclave:
    """Full client-side check. Raises a VerificationError subclass on
    the first failed step; returns the bound identity on success."""
    try:
        report = AttestationReport.from_bytes(report_bytes)
    except ValueError as exc:
        raise SignatureError(f"unparseable report: {exc}") from exc

    cert = report.certificate
    if cert.role != REPORT_KEY_ROLE:
        raise SignatureError("report certificate has wrong role")
    if not crypto.verify(
        ias_root_public_key, cert.signed_payload(), cert.signature
    ):
        raise SignatureError("report certificate not signed by pinned root")
    if not crypto.verify(
        cert.subject_public_key, report.signed_payload(), report.signature
    ):
        raise SignatureError("report signature invalid")

    if report.verdict == Verdict.PLATFORM_REVOKED:
        raise Revoked("platform is revoked")
    if report.verdict != Verdict.OK:
        raise SignatureError("verifier rejected the quote")

    try:
        quote = Quote.from_bytes(quote_bytes)
    except ValueError as exc:
        raise SignatureError(f"unparseable quote: {exc}") from exc
    if report.quote_digest != crypto.sha256(quote_bytes):
        raise SignatureError("report was issued for a different quote")
    if report.measurement != quote.measurement:
        raise SignatureError("report and quote disagree on measurement")
    if report.bound_key_digest != quote.bound_key_digest:
        raise SignatureError("report and quote disagree on bound key")

    if not whitelist.allows(quote.measurement):
        raise UntrustedMeasurement("measurement not in whitelist")

    if crypto.sha256(enclave_dh_public_key) != quote.bound_key_digest:
        raise KeyBindingMismatch("offered key is not the attested key")

    return VerifiedEnclave(
        measurement=quote.measurement,
        enclave_public_key=enclave_dh_public_key,
        report=report,
    )


@dataclass(frozen=True)
class ClientChannel:
    client_public_key: bytes
    session_key: bytes


def establish_channel(
    verified: VerifiedEnclave, rng: Random | None = None
) -> ClientChannel:
    """Ephemeral ECDH against the attested enclave key."""
    private = crypto.generate_private_key(rng)
    session_key = crypto.derive_shared_key(
        private, verified.enclave_public_key, crypto.SESSION_LABEL
    )
    return ClientChannel(
        client_public_key=crypto.public_bytes(private), session_key=session_key
    )


def encrypt_field(
    channel: ClientChannel, plaintext: bytes, rng: Random | None = None
) -> EncryptedCredential:
    return crypto.encrypt_credential(
        channel.session_key, channel.client_public_key, plaintext, rng
    )
