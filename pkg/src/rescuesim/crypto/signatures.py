"""Aggregatable BLS-style signatures behind a small backend interface.

The scheme code is generic: a backend supplies hashing to the signature
group, scalar multiplication, point addition and a pairing equality check.
Two backends ship:

* ``sim`` - a toy bilinear group over Z_q with e(a, b) = a*b mod q. It keeps
  the BLS algebra intact (sign, verify, weighted aggregation) and costs a
  few big-int multiplications per operation. It has no security at all,
  which is fine for protocol simulation where nobody forges.
* ``bls12_381`` - real pairings from py_ecc (optional dependency, slow:
  about a second per pairing in pure Python).

Public keys and signatures cross the API as bytes, so a malformed signature
is just bytes that fail to decode and verify() returns False.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .hashing import h1


@lru_cache(maxsize=1 << 16)
def _sim_hash_to_point(message: bytes) -> int:
    # every committee member verifies the same vote bytes, so memoize the hash
    v = int.from_bytes(hashlib.sha256(b"rescuesim/H0pt" + message).digest(), "big") % SimBackend.order
    return v or 1


class SimBackend:
    name = "sim"
    # Mersenne prime 2^127 - 1
    order = (1 << 127) - 1
    generator = 5
    sig_size = 16
    pk_size = 16

    def keypair(self, seed: bytes) -> tuple[int, bytes]:
        sk = h1(b"keygen" + seed, self.order)
        return sk, self.encode_pk(sk * self.generator % self.order)

    def hash_to_point(self, message: bytes) -> int:
        return _sim_hash_to_point(message)

    def mul(self, point: int, scalar: int) -> int:
        return point * scalar % self.order

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.order

    def zero_sig(self) -> int:
        return 0

    zero_pk = zero_sig

    def pairing_check(self, sig: int, msg_point: int, pk: int) -> bool:
        # e(sig, g) == e(H(m), pk)
        return sig * self.generator % self.order == msg_point * pk % self.order

    def encode_sig(self, sig: int) -> bytes:
        return sig.to_bytes(self.sig_size, "big")

    def decode_sig(self, data: bytes):
        if not isinstance(data, (bytes, bytearray)) or len(data) != self.sig_size:
            return None
        v = int.from_bytes(data, "big")
        return v if v < self.order else None

    def encode_pk(self, pk: int) -> bytes:
        return pk.to_bytes(self.pk_size, "big")

    def decode_pk(self, data: bytes):
        return self.decode_sig(data)


class PairingBackend:
    """BLS over BLS12-381 with public keys in G1 and signatures in G2."""

    name = "bls12_381"
    sig_size = 96
    pk_size = 48
    DST = b"RESCUESIM_BLS_SIG_BLS12381G2_XMD:SHA-256_SSWU_RO_"

    def __init__(self):
        from py_ecc.bls.g2_primitives import (G1_to_pubkey, G2_to_signature,
                                              pubkey_to_G1, signature_to_G2)
        from py_ecc.bls.hash_to_curve import hash_to_G2
        from py_ecc.optimized_bls12_381 import G1, Z1, Z2, add, curve_order, multiply, pairing

        self._g1, self._z1, self._z2 = G1, Z1, Z2
        self._add, self._multiply, self._pairing = add, multiply, pairing
        self._h2c = hash_to_G2
        self._enc_pk, self._dec_pk = G1_to_pubkey, pubkey_to_G1
        self._enc_sig, self._dec_sig = G2_to_signature, signature_to_G2
        self.order = curve_order

    def keypair(self, seed: bytes):
        sk = h1(b"keygen" + seed, self.order)
        return sk, self.encode_pk(self._multiply(self._g1, sk))

    def hash_to_point(self, message: bytes):
        return self._h2c(message, self.DST, hashlib.sha256)

    def mul(self, point, scalar):
        return self._multiply(point, scalar)

    def add(self, a, b):
        return self._add(a, b)

    def zero_sig(self):
        return self._z2

    def zero_pk(self):
        return self._z1

    def pairing_check(self, sig, msg_point, pk) -> bool:
        return self._pairing(sig, self._g1) == self._pairing(msg_point, pk)

    def encode_sig(self, sig) -> bytes:
        return self._enc_sig(sig)

    def decode_sig(self, data: bytes):
        try:
            return self._dec_sig(bytes(data))
        except Exception:
            return None

    def encode_pk(self, pk) -> bytes:
        return self._enc_pk(pk)

    def decode_pk(self, data: bytes):
        try:
            return self._dec_pk(bytes(data))
        except Exception:
            return None


_BACKENDS: dict = {}


def get_backend(name: str = "sim"):
    if name not in _BACKENDS:
        if name == "sim":
            _BACKENDS[name] = SimBackend()
        elif name == "bls12_381":
            _BACKENDS[name] = PairingBackend()
        else:
            raise ValueError(f"unknown signature backend {name!r}")
    return _BACKENDS[name]


def _seed_bytes(seed) -> bytes:
    if isinstance(seed, (bytes, bytearray)):
        return bytes(seed)
    if isinstance(seed, int):
        return seed.to_bytes(16, "big", signed=True)
    return str(seed).encode()


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: bytes
    owner: int | str = 0
    index: int = 0

    def __repr__(self):
        return f"KeyPair(owner={self.owner!r}, index={self.index}, pk={self.pk.hex()[:12]}...)"


def keygen(seed, owner: int | str = 0, index: int = 0, backend: str = "sim") -> KeyPair:
    """Deterministic key pair from a seed (bytes, int or str), the owner label and the index."""
    tag = _seed_bytes(seed) + b"/" + str(owner).encode() + b"/" + str(index).encode()
    sk, pk = get_backend(backend).keypair(tag)
    return KeyPair(sk, pk, owner, index)


def sign(message: bytes, sk: int, backend: str = "sim") -> bytes:
    be = get_backend(backend)
    return be.encode_sig(be.mul(be.hash_to_point(message), sk))


def verify(signature: bytes, message: bytes, pk: bytes, backend: str = "sim") -> bool:
    be = get_backend(backend)
    sig = be.decode_sig(signature)
    pkp = be.decode_pk(pk)
    if sig is None or pkp is None:
        return False
    return be.pairing_check(sig, be.hash_to_point(message), pkp)


@lru_cache(maxsize=4096)
def aggregation_weights(pks: tuple, backend: str = "sim") -> tuple:
    """Per-signer weights H1(pk_i, pk_1 .. pk_n) that defeat rogue-key attacks."""
    order = get_backend(backend).order
    joined = b"".join(pks)
    return tuple(h1(pk + joined, order) for pk in pks)


@lru_cache(maxsize=4096)
def _aggregate_pk(pks: tuple, backend: str):
    be = get_backend(backend)
    weights = aggregation_weights(pks, backend)
    acc = be.zero_pk()
    for pk, w in zip(pks, weights):
        p = be.decode_pk(pk)
        if p is None:
            return None
        acc = be.add(acc, be.mul(p, w))
    return acc


@dataclass(frozen=True)
class AggregateSignature:
    sigma: bytes
    pks: tuple
    weights: tuple

    @property
    def n_signers(self) -> int:
        return len(self.pks)

    def wire_size(self, committee_size: int | None = None) -> int:
        """Bytes on the wire: the combined signature plus a signer bitmap."""
        n = committee_size if committee_size is not None else len(self.pks)
        return len(self.sigma) + (n + 7) // 8


def aggregate(signatures: Sequence[bytes], pks: Sequence[bytes], backend: str = "sim") -> AggregateSignature:
    """Weighted combination of signatures that share one message."""
    if len(signatures) != len(pks) or not pks:
        raise ValueError("need one public key per signature and at least one signer")
    be = get_backend(backend)
    pks = tuple(pks)
    weights = aggregation_weights(pks, backend)
    acc = be.zero_sig()
    for s, w in zip(signatures, weights):
        p = be.decode_sig(s)
        if p is None:
            raise ValueError("cannot aggregate a malformed signature")
        acc = be.add(acc, be.mul(p, w))
    return AggregateSignature(be.encode_sig(acc), pks, weights)


def verify_aggregate(agg: AggregateSignature, message: bytes, backend: str = "sim") -> bool:
    be = get_backend(backend)
    if not agg.pks or agg.weights != aggregation_weights(tuple(agg.pks), backend):
        return False
    sig = be.decode_sig(agg.sigma)
    apk = _aggregate_pk(tuple(agg.pks), backend)
    if sig is None or apk is None:
        return False
    return be.pairing_check(sig, be.hash_to_point(message), apk)
