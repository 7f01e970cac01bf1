"""Canonical binary framing used by every wire object.

A message is a sequence of fields, each encoded as a 4-byte big-endian
length followed by the raw bytes. Parsing is strict: a frame must
consume its input exactly, so two frames are byte-equal iff their field
lists are equal. Integers travel as fixed-width big-endian fields.
"""

from __future__ import annotations

import base64


def u32(value: int) -> bytes:
    if not 0 <= value < 2**32:
        raise ValueError(f"u32 out of range: {value}")
    return value.to_bytes(4, "big")


def u64(value: int) -> bytes:
    if not 0 <= value < 2**64:
        raise ValueError(f"u64 out of range: {value}")
    return value.to_bytes(8, "big")


def read_u32(data: bytes) -> int:
    if len(data) != 4:
        raise ValueError("u32 field must be exactly 4 bytes")
    return int.from_bytes(data, "big")


def read_u64(data: bytes) -> int:
    if len(data) != 8:
        raise ValueError("u64 field must be exactly 8 bytes")
    return int.from_bytes(data, "big")


def write_fields(*fields: bytes) -> bytes:
    out = bytearray()
    for field in fields:
        out += u32(len(field))
        out += field
    return bytes(out)


def read_fields(data: bytes, count: int) -> list[bytes]:
    """Parse exactly `count` length-prefixed fields, consuming all input."""
    fields: list[bytes] = []
    offset = 0
    for _ in range(count):
        if offset + 4 > len(data):
            raise ValueError("truncated field header")
        length = int.from_bytes(data[offset : offset + 4], "big")
        offset += 4
        if offset + length > len(data):
            raise ValueError("truncated field body")
        fields.append(data[offset : offset + length])
        offset += length
    if offset != len(data):
        raise ValueError("trailing bytes after last field")
    return fields


def write_seq(items: list[bytes]) -> bytes:
    """Counted sequence: u32 count, then each item as a field."""
    return u32(len(items)) + write_fields(*items)


def read_seq(data: bytes) -> list[bytes]:
    if len(data) < 4:
        raise ValueError("truncated sequence header")
    count = int.from_bytes(data[:4], "big")
    return read_fields(data[4:], count)


def b64e(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64d(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)
