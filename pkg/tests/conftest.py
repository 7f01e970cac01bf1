"""Shared fixtures.

Everything here is deterministic: stacks take an integer seed and all
randomness flows from it (except ECDSA nonces, which never show up in
any asserted value).
"""

from random import Random

import pytest

from safekeeper.attestation import AttestationProxy, QuotingAuthority, VerificationService
from safekeeper.clock import SimClock
from safekeeper.enclave import Enclave, EnclaveConfig
from safekeeper.platform import VirtualTeePlatform


@pytest.fixture
def clock():
    return SimClock()


@pytest.fixture
def make_enclave(clock):
    """Factory for a (platform, enclave) pair wired to a fresh authority."""

    def build(seed: int = 1, attempts_max: int = 144, window_seconds: int = 86400,
              code_identity: str | None = None):
        rng = Random(seed)
        authority = QuotingAuthority(Random(seed + 1000))
        platform = VirtualTeePlatform(clock, rng, quoting_authority=authority)
        config = EnclaveConfig(attempts_max=attempts_max, window_seconds=window_seconds)
        kwargs = {}
        if code_identity is not None:
            kwargs["code_identity"] = code_identity
        enclave = Enclave.init(platform, config, **kwargs)
        return platform, enclave

    return build


@pytest.fixture
def attestation_fabric(clock):
    """Authority + verification service + caching proxy, one trust root."""
    rng = Random(99)
    authority = QuotingAuthority(Random(77))
    service = VerificationService(authority.public_key, clock, Random(78))
    proxy = AttestationProxy(service, clock)
    platform = VirtualTeePlatform(clock, rng, quoting_authority=authority)
    return platform, authority, service, proxy
