"""Quotes, verification reports, revocation lists, and the caching proxy.

Trust layout: a quoting authority signs quotes on behalf of platforms; a
verification service (the only party that can judge quotes) signs
reports with a key certified by its root key; relying parties pin the
root key and therefore need no trust in whoever carried the report to
them. That party is the proxy below: it may cache and forward, and any
tampering it tries shows up as a bad signature at the client.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from random import Random

from . import codec, crypto
from .clock import Clock

PLATFORM_ID_BYTES = 16

QUOTE_CONTEXT = b"attest-quote"
REPORT_CONTEXT = b"attest-report"
CERT_CONTEXT = b"attest-cert"
SIGRL_CONTEXT = b"attest-sigrl"

REPORT_KEY_ROLE = b"report-signing"


class Verdict(IntEnum):
    OK = 0
    QUOTE_INVALID = 1
    PLATFORM_REVOKED = 2


@dataclass(frozen=True)
class Quote:
    measurement: bytes
    bound_key_digest: bytes
    platform_id: bytes
    signature: bytes

    def signed_payload(self) -> bytes:
        return codec.write_fields(
            QUOTE_CONTEXT, self.measurement, self.bound_key_digest, self.platform_id
        )

    def to_bytes(self) -> bytes:
        return codec.write_fields(
            self.measurement, self.bound_key_digest, self.platform_id, self.signature
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Quote":
        m, k, p, sig = codec.read_fields(data, 4)
        if len(m) != 32 or len(k) != 32 or len(p) != PLATFORM_ID_BYTES:
            raise ValueError("bad quote field width")
        return cls(m, k, p, sig)


class QuotingAuthority:
    """Signs quotes. One authority key stands in for the whole EPID
    group hierarchy; platform anonymity is out of scope here."""

    def __init__(self, rng: Random | None = None, private_scalar: bytes | None = None):
        if private_scalar is not None:
            self._key = crypto.ec_private_from_scalar(private_scalar)
        else:
            self._key = crypto.generate_private_key(rng)

    @property
    def public_key(self) -> bytes:
        return crypto.public_bytes(self._key)

    def key_scalar(self) -> bytes:
        """Export for host-side persistence across process restarts."""
        return crypto.ec_scalar_bytes(self._key)

    def issue(self, measurement: bytes, bound_key: bytes, platform_id: bytes) -> bytes:
        quote = Quote(
            measurement=measurement,
            bound_key_digest=crypto.sha256(bound_key),
            platform_id=platform_id,
            signature=b"",
        )
        sig = crypto.sign(self._key, quote.signed_payload())
        return Quote(
            quote.measurement, quote.bound_key_digest, quote.platform_id, sig
        ).to_bytes()


@dataclass(frozen=True)
class Certificate:
    subject_public_key: bytes
    role: bytes
    signature: bytes

    def signed_payload(self) -> bytes:
        return codec.write_fields(CERT_CONTEXT, self.subject_public_key, self.role)

    def to_bytes(self) -> bytes:
        return codec.write_fields(self.subject_public_key, self.role, self.signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Certificate":
        subject, role, sig = codec.read_fields(data, 3)
        return cls(subject, role, sig)


@dataclass(frozen=True)
class AttestationReport:
    verdict: Verdict
    quote_digest: bytes
    measurement: bytes
    bound_key_digest: bytes
    timestamp: int
    certificate: Certificate
    signature: bytes

    def signed_payload(self) -> bytes:
        return codec.write_fields(
            REPORT_CONTEXT,
            codec.u32(int(self.verdict)),
            self.quote_digest,
            self.measurement,
            self.bound_key_digest,
            codec.u64(self.timestamp),
        )

    def to_bytes(self) -> bytes:
        return codec.write_fields(
            codec.u32(int(self.verdict)),
            self.quote_digest,
            self.measurement,
            self.bound_key_digest,
            codec.u64(self.timestamp),
            self.certificate.to_bytes(),
            self.signature,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "AttestationReport":
        fields = codec.read_fields(data, 7)
        return cls(
            verdict=Verdict(codec.read_u32(fields[0])),
            quote_digest=fields[1],
            measurement=fields[2],
            bound_key_digest=fields[3],
            timestamp=codec.read_u64(fields[4]),
            certificate=Certificate.from_bytes(fields[5]),
            signature=fields[6],
        )


@dataclass(frozen=True)
class SigRL:
    platform_ids: tuple[bytes, ...]
    issued_at: int
    signature: bytes

    def signed_payload(self) -> bytes:
        return codec.write_fields(
            SIGRL_CONTEXT, codec.u64(self.issued_at), b"".join(self.platform_ids)
        )

    def to_bytes(self) -> bytes:
        return codec.write_fields(
            codec.u64(self.issued_at), b"".join(self.platform_ids), self.signature
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "SigRL":
        ts, ids_blob, sig = codec.read_fields(data, 3)
        if len(ids_blob) % PLATFORM_ID_BYTES != 0:
            raise ValueError("bad revocation list length")
        ids = tuple(
            ids_blob[i : i + PLATFORM_ID_BYTES]
            for i in range(0, len(ids_blob), PLATFORM_ID_BYTES)
        )
        return cls(ids, codec.read_u64(ts), sig)

    def contains(self, platform_id: bytes) -> bool:
        return platform_id in self.platform_ids


class VerificationService:
    """Mock attestation verifier (the IAS role).

    Owns the root key relying parties pin, a report-signing key
    certified by that root, and the platform revocation list.
    """

    def __init__(
        self,
        authority_public_key: bytes,
        clock: Clock,
        rng: Random | None = None,
        key_scalars: tuple[bytes, bytes] | None = None,
    ):
        self._authority_public = authority_public_key
        self._clock = clock
        if key_scalars is not None:
            self._root = crypto.ec_private_from_scalar(key_scalars[0])
            self._report_key = crypto.ec_private_from_scalar(key_scalars[1])
        else:
            self._root = crypto.generate_private_key(rng)
            self._report_key = crypto.generate_private_key(rng)
        cert = Certificate(
            crypto.public_bytes(self._report_key), REPORT_KEY_ROLE, b""
        )
        self._cert = Certificate(
            cert.subject_public_key,
            cert.role,
            crypto.sign(self._root, cert.signed_payload()),
        )
        self._revoked: list[bytes] = []
        self._sigrl = self._sign_sigrl(self._clock.now())

    @property
    def root_public_key(self) -> bytes:
        return crypto.public_bytes(self._root)

    def key_scalars(self) -> tuple[bytes, bytes]:
        """Export (root, report) keys for host-side persistence."""
        return crypto.ec_scalar_bytes(self._root), crypto.ec_scalar_bytes(self._report_key)

    def _sign_sigrl(self, issued_at: int) -> SigRL:
        rl = SigRL(tuple(self._revoked), issued_at, b"")
        return SigRL(rl.platform_ids, rl.issued_at, crypto.sign(self._root, rl.signed_payload()))

    def revoke_platform(self, platform_id: bytes) -> None:
        if platform_id not in self._revoked:
            self._revoked.append(platform_id)
        issued_at = max(self._clock.now(), self._sigrl.issued_at + 1)
        self._sigrl = self._sign_sigrl(issued_at)

    def current_sigrl(self) -> SigRL:
        return self._sigrl

    def verify(self, quote_bytes: bytes) -> bytes:
        """Judge a quote; always returns a signed report, never raises."""
        quote_digest = crypto.sha256(quote_bytes)
        verdict = Verdict.OK
        measurement = bytes(32)
        bound_key_digest = bytes(32)
        try:
            quote = Quote.from_bytes(quote_bytes)
        except ValueError:
            quote = None
        if quote is None or not crypto.verify(
            self._authority_public, quote.signed_payload(), quote.signature
        ):
            verdict = Verdict.QUOTE_INVALID
        else:
            measurement = quote.measurement
            bound_key_digest = quote.bound_key_digest
            if quote.platform_id in self._revoked:
                verdict = Verdict.PLATFORM_REVOKED
        report = AttestationReport(
            verdict=verdict,
            quote_digest=quote_digest,
            measurement=measurement,
            bound_key_digest=bound_key_digest,
            timestamp=self._clock.now(),
            certificate=self._cert,
            signature=b"",
        )
        sig = crypto.sign(self._report_key, report.signed_payload())
        return AttestationReport(
            report.verdict,
            report.quote_digest,
            report.measurement,
            report.bound_key_digest,
            report.timestamp,
            report.certificate,
            sig,
        ).to_bytes()


class UpstreamUnavailable(Exception):
    pass


class ProxyUnavailable(Exception):
    """Upstream is down and the answer is not in cache."""


class AttestationProxy:
    """Untrusted report cache between servers and the verifier.

    Serves cached reports for up to report_ttl seconds keyed by quote
    digest, refreshes the revocation list every sigrl_refresh seconds,
    and drops the whole report cache when the list changes. "Untrusted"
    is literal: nothing the proxy stores or forwards is taken on faith
    by clients, the report signatures are.
    """

    def __init__(
        self,
        upstream: VerificationService,
        clock: Clock,
        report_ttl: int = 600,
        sigrl_refresh: int = 3600,
    ):
        self._upstream = upstream
        self._clock = clock
        self._ttl = int(report_ttl)
        self._refresh = int(sigrl_refresh)
        self._cache: dict[bytes, tuple[bytes, int]] = {}
        self._sigrl_digest: bytes | None = None
        self._sigrl_fetched_at: int | None = None
        self.hits = 0
        self.misses = 0

    def _maybe_refresh_sigrl(self, now: int) -> None:
        due = (
            self._sigrl_fetched_at is None
            or now - self._sigrl_fetched_at >= self._refresh
        )
        if not due:
            return
        try:
            rl = self._upstream.current_sigrl()
        except UpstreamUnavailable:
            return
        self._sigrl_fetched_at = now
        digest = crypto.sha256(rl.to_bytes())
        if digest != self._sigrl_digest:
            self._sigrl_digest = digest
            self._cache.clear()

    def request(self, quote_bytes: bytes) -> bytes:
        now = self._clock.now()
        self._maybe_refresh_sigrl(now)
        key = crypto.sha256(quote_bytes)
        entry = self._cache.get(key)
        if entry is not None and now - entry[1] < self._ttl:
            self.hits += 1
            return entry[0]
        try:
            report = self._upstream.verify(quote_bytes)
        except UpstreamUnavailable:
            raise ProxyUnavailable("verifier unreachable and no fresh cache entry")
        self.misses += 1
        self._cache[key] = (report, now)
        return report


class FlakyUpstream:
    """Test/scenario shim: a verifier whose link can be cut."""

    def __init__(self, inner: VerificationService):
        self._inner = inner
        self.online = True

    def verify(self, quote_bytes: bytes) -> bytes:
        if not self.online:
            raise UpstreamUnavailable("link down")
        return self._inner.verify(quote_bytes)

    def current_sigrl(self) -> SigRL:
        if not self.online:
            raise UpstreamUnavailable("link down")
        return self._inner.current_sigrl()


class SigRLClient:
    """Server-side revocation list fetcher with staleness tracking."""

    def __init__(self, source, clock: Clock, refresh_seconds: int = 3600):
        self._source = source
        self._clock = clock
        self._refresh = int(refresh_seconds)
        self._current: SigRL | None = None
        self._fetched_at: int | None = None
        self.stale = False

    def maybe_refresh(self) -> SigRL | None:
        now = self._clock.now()
        if self._fetched_at is not None and now - self._fetched_at < self._refresh:
            return self._current
        try:
            self._current = self._source.current_sigrl()
        except UpstreamUnavailable:
            self.stale = self._current is not None or self.stale
            return self._current
        self._fetched_at = now
        self.stale = False
        return self._current

    @property
    def current(self) -> SigRL | None:
        return self._current
