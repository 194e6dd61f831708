"""Canonical binary encoding and the digest seam.

Every field is written as a 4-byte big-endian length followed by its bytes;
integers become 8-byte big-endian and strings UTF-8 before framing.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Union

Field = Union[bytes, bytearray, int, str]

DIGEST_SIZE = 32
ADDRESS_SIZE = 20


def digest(data: bytes) -> bytes:
    """The one 256-bit hash used for every commitment in the ledger."""
    return hashlib.sha256(data).digest()


EMPTY_DIGEST = digest(b"")
ZERO_DIGEST = bytes(DIGEST_SIZE)
ZERO_ADDRESS = bytes(ADDRESS_SIZE)


class DecodeError(ValueError):
    pass


def _field_bytes(value: Field) -> bytes:
    if isinstance(value, bool):
        raise TypeError("booleans have no canonical encoding; use int")
    if isinstance(value, int):
        if value < 0:
            raise ValueError("canonical integers are unsigned")
        return value.to_bytes(8, "big")
    if isinstance(value, str):
        return value.encode("utf-8")
    return bytes(value)


def encode(*fields: Field) -> bytes:
    out = bytearray()
    for f in fields:
        raw = _field_bytes(f)
        out += len(raw).to_bytes(4, "big")
        out += raw
    return bytes(out)


def encode_list(items: Iterable[Field]) -> bytes:
    return encode(*items)


def decode(data: bytes) -> list[bytes]:
    """Split a canonical encoding back into raw field bytes."""
    fields = []
    i = 0
    n = len(data)
    while i < n:
        if i + 4 > n:
            raise DecodeError("truncated length prefix")
        size = int.from_bytes(data[i : i + 4], "big")
        i += 4
        if i + size > n:
            raise DecodeError("truncated field")
        fields.append(bytes(data[i : i + size]))
        i += size
    return fields


def as_int(raw: bytes) -> int:
    if len(raw) != 8:
        raise DecodeError("integer fields are 8 bytes")
    return int.from_bytes(raw, "big")
