"""Domain-separated hash helpers.

h0 maps bytes to a 32-byte digest (used for content pointers, block hashes
and Merkle nodes). h1 maps bytes to a scalar modulo a group order.
"""
from __future__ import annotations

import hashlib

DIGEST_SIZE = 32


def h0(data: bytes) -> bytes:
    return hashlib.sha256(b"rescuesim/H0" + data).digest()


def h1(data: bytes, order: int) -> int:
    """Hash to a non-zero scalar modulo order."""
    wide = hashlib.sha512(b"rescuesim/H1" + data).digest()
    return int.from_bytes(wide, "big") % (order - 1) + 1


def short(digest: bytes, n: int = 8) -> str:
    return digest.hex()[:n]
