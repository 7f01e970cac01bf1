"""Virtual TEE platform primitives: sealing, counters, trusted time."""

from random import Random

import pytest

from safekeeper.attestation import Quote, QuotingAuthority
from safekeeper.clock import SimClock
from safekeeper.platform import PlatformSealError, VirtualTeePlatform


@pytest.fixture
def platform():
    return VirtualTeePlatform(SimClock(), Random(1), QuotingAuthority(Random(2)))


def test_counter_is_monotonic(platform):
    start = platform.read_counter()
    assert platform.increment_counter() == start + 1
    assert platform.increment_counter() == start + 2
    assert platform.read_counter() == start + 2


def test_seal_round_trip(platform):
    m = b"\x01" * 32
    blob = platform.seal(m, b"secret state")
    assert platform.unseal(m, blob) == b"secret state"
    assert b"secret state" not in blob


def test_seal_bound_to_measurement(platform):
    blob = platform.seal(b"\x01" * 32, b"data")
    with pytest.raises(PlatformSealError):
        platform.unseal(b"\x02" * 32, blob)


def test_seal_bound_to_platform():
    clock = SimClock()
    authority = QuotingAuthority(Random(2))
    a = VirtualTeePlatform(clock, Random(1), authority)
    b = VirtualTeePlatform(clock, Random(3), authority)
    blob = a.seal(b"\x01" * 32, b"data")
    with pytest.raises(PlatformSealError):
        b.unseal(b"\x01" * 32, blob)


def test_seal_tamper_detected(platform):
    m = b"\x01" * 32
    blob = platform.seal(m, b"data")
    bad = blob[:-1] + bytes([blob[-1] ^ 1])
    with pytest.raises(PlatformSealError):
        platform.unseal(m, bad)


def test_trusted_time_nonce_stable_until_reset(platform):
    t1, n1 = platform.trusted_time()
    t2, n2 = platform.trusted_time()
    assert n1 == n2 and t2 >= t1
    platform.reset_time_source()
    _, n3 = platform.trusted_time()
    assert n3 != n1


def test_quote_issued_for_bound_key(platform):
    q = Quote.from_bytes(platform.issue_quote(b"\x05" * 32, b"\x04" + bytes(64)))
    assert q.measurement == b"\x05" * 32
    import hashlib

    assert q.bound_key_digest == hashlib.sha256(b"\x04" + bytes(64)).digest()


def test_random_bytes_length(platform):
    assert len(platform.random_bytes(16)) == 16
    assert platform.random_bytes(8) != platform.random_bytes(8)
