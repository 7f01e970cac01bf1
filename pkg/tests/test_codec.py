"""Wire framing round trips and strictness."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from safekeeper.codec import (
    b64d,
    b64e,
    read_fields,
    read_seq,
    read_u32,
    read_u64,
    u32,
    u64,
    write_fields,
    write_seq,
)


@given(st.lists(st.binary(max_size=300), max_size=10))
def test_fields_round_trip(fields):
    data = write_fields(*fields)
    assert read_fields(data, len(fields)) == list(fields)


@given(st.lists(st.lists(st.binary(max_size=64), max_size=4), max_size=6))
def test_seq_round_trip(rows):
    blobs = [write_fields(*row) for row in rows]
    data = write_seq(blobs)
    assert read_seq(data) == blobs


def test_fields_reject_trailing_garbage():
    data = write_fields(b"a", b"bb") + b"\x00"
    with pytest.raises(ValueError):
        read_fields(data, 2)


def test_fields_reject_truncation():
    data = write_fields(b"a", b"bb")
    with pytest.raises(ValueError):
        read_fields(data[:-1], 2)


def test_fields_reject_wrong_count():
    data = write_fields(b"a", b"bb")
    with pytest.raises(ValueError):
        read_fields(data, 3)


def test_length_prefix_is_big_endian_u32():
    assert write_fields(b"ab") == b"\x00\x00\x00\x02ab"


def test_u32_u64_round_trip():
    for n in (0, 1, 2**32 - 1):
        assert read_u32(u32(n)) == n
    for n in (0, 1, 2**63, 2**64 - 1):
        assert read_u64(u64(n)) == n


def test_u32_rejects_out_of_range():
    with pytest.raises((ValueError, OverflowError)):
        u32(2**32)
    with pytest.raises((ValueError, OverflowError)):
        u32(-1)


@given(st.binary(max_size=200))
def test_base64_round_trip(data):
    assert b64d(b64e(data)) == data
