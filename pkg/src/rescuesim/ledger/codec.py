"""Canonical binary codec.

Every value is written as tag (1 byte) + length (4 bytes, big endian) +
payload. Field order is fixed by the caller, so equal structures always
produce identical bytes and signatures can be taken over them.

Tags: i=int, f=float, b=bytes, s=str, n=None, l=list/tuple.
"""
from __future__ import annotations

import struct
from functools import lru_cache

VERSION = 0x01


class CodecError(ValueError):
    pass


def _enc(value, out: list):
    if value is None:
        out.append(b"n\x00\x00\x00\x00")
    elif isinstance(value, bool):
        out.append(b"i\x00\x00\x00\x01" + (b"\x01" if value else b"\x00"))
    elif isinstance(value, int):
        n = (value.bit_length() + 8) // 8
        out.append(b"i" + n.to_bytes(4, "big") + value.to_bytes(n, "big", signed=True))
    elif isinstance(value, float):
        out.append(b"f\x00\x00\x00\x08" + struct.pack(">d", value))
    elif isinstance(value, (bytes, bytearray)):
        out.append(b"b" + len(value).to_bytes(4, "big") + bytes(value))
    elif isinstance(value, str):
        raw = value.encode()
        out.append(b"s" + len(raw).to_bytes(4, "big") + raw)
    elif isinstance(value, (list, tuple)):
        inner: list = []
        for v in value:
            _enc(v, inner)
        body = b"".join(inner)
        out.append(b"l" + len(body).to_bytes(4, "big") + body)
    else:
        raise CodecError(f"cannot encode {type(value).__name__}")


def encode(*fields) -> bytes:
    out: list = []
    for f in fields:
        _enc(f, out)
    return b"".join(out)


def _dec(data: bytes, pos: int):
    if pos + 5 > len(data):
        raise CodecError("truncated field header")
    tag = data[pos:pos + 1]
    n = int.from_bytes(data[pos + 1:pos + 5], "big")
    start, end = pos + 5, pos + 5 + n
    if end > len(data):
        raise CodecError("truncated field payload")
    raw = data[start:end]
    if tag == b"n":
        return None, end
    if tag == b"i":
        return int.from_bytes(raw, "big", signed=True), end
    if tag == b"f":
        return struct.unpack(">d", raw)[0], end
    if tag == b"b":
        return raw, end
    if tag == b"s":
        return raw.decode(), end
    if tag == b"l":
        items = []
        p = start
        while p < end:
            v, p = _dec(data, p)
            items.append(v)
        if p != end:
            raise CodecError("list overrun")
        return tuple(items), end
    raise CodecError(f"unknown tag {tag!r}")


def decode(data: bytes) -> tuple:
    out = []
    pos = 0
    while pos < len(data):
        v, pos = _dec(data, pos)
        out.append(v)
    return tuple(out)


def versioned(kind: str, *fields) -> bytes:
    return bytes([VERSION]) + encode(kind, *fields)


def unversioned(data: bytes) -> tuple:
    """Strip and check the version byte; returns (kind, *fields)."""
    if not data or data[0] != VERSION:
        raise CodecError("unsupported codec version")
    return decode(data[1:])


@lru_cache(maxsize=1 << 16)
def vote_bytes(kind: str, height: int, round: int, value: bytes) -> bytes:
    """Bytes signed by a prevote or precommit."""
    return encode("vote", kind, height, round, value)
