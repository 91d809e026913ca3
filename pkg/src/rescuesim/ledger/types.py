"""Transactions, the LastProof script and blocks."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..crypto import AggregateSignature, aggregation_weights, h0, merkle_root, EMPTY_LEAF, sign
from .codec import CodecError, unversioned, versioned

NIL = b"\x00" * 32  # distinguished "no block" value in votes


def _memo(obj, key, make):
    # frozen dataclasses still have a __dict__; encodings are cached there
    v = obj.__dict__.get(key)
    if v is None:
        v = obj.__dict__[key] = make()
    return v


@dataclass(frozen=True)
class OffchainTx:
    """Pointer to offloaded sensing data and its computed result."""
    uav_pk: bytes
    vehicle_pks: tuple
    raw_ptr: bytes
    out_ptr: bytes
    description: str
    timestamp: float
    uav_sig: bytes = b""
    vehicle_sig: bytes = b""
    certificate: bytes = b""

    kind = "offchain"

    def signing_bytes(self) -> bytes:
        return versioned(self.kind, self.uav_pk, tuple(self.vehicle_pks), self.raw_ptr, self.out_ptr,
                         self.description, float(self.timestamp))

    def fields(self) -> tuple:
        return (self.uav_pk, tuple(self.vehicle_pks), self.raw_ptr, self.out_ptr, self.description,
                float(self.timestamp), self.uav_sig, self.vehicle_sig, self.certificate)

    def encode(self) -> bytes:
        return _memo(self, "_enc", lambda: versioned(self.kind, *self.fields()))

    @property
    def digest(self) -> bytes:
        return h0(self.encode())

    def vehicle_aggregate(self, backend: str = "sim") -> AggregateSignature:
        pks = tuple(self.vehicle_pks)
        return AggregateSignature(self.vehicle_sig, pks, aggregation_weights(pks, backend))


@dataclass(frozen=True)
class ReportTx:
    """Accusation of a misbehaving validator, multi-signed by its informers."""
    accused: int
    accused_pk: bytes
    informers: tuple
    informer_pks: tuple
    evidence: bytes
    fee: float
    timestamp: float
    informer_sig: bytes = b""

    kind = "report"

    def signing_bytes(self) -> bytes:
        return versioned(self.kind, self.accused, self.accused_pk, tuple(self.informers),
                         tuple(self.informer_pks), self.evidence, float(self.fee), float(self.timestamp))

    def fields(self) -> tuple:
        return (self.accused, self.accused_pk, tuple(self.informers), tuple(self.informer_pks), self.evidence,
                float(self.fee), float(self.timestamp), self.informer_sig)

    def encode(self) -> bytes:
        return _memo(self, "_enc", lambda: versioned(self.kind, *self.fields()))

    @property
    def digest(self) -> bytes:
        return h0(self.encode())

    def informer_aggregate(self, backend: str = "sim") -> AggregateSignature:
        pks = tuple(self.informer_pks)
        return AggregateSignature(self.informer_sig, pks, aggregation_weights(pks, backend))


TX_TYPES = {"offchain": OffchainTx, "report": ReportTx}


def decode_tx(data: bytes):
    kind, *rest = unversioned(data)
    cls = TX_TYPES.get(kind)
    if cls is None:
        raise CodecError(f"unknown tx kind {kind!r}")
    return cls(*rest)


@dataclass(frozen=True)
class LastProof:
    """Evidence that the parent block was committed.

    LastCommit is carried either as one aggregate over the precommits
    (``aggregate``) or, for the plain Tendermint baseline, as the individual
    precommit signatures (``signatures``). votes_root is the Merkle root over
    every vote justifying those precommits; votes_ptr locates the votes in
    the off-chain store.
    """
    height: int
    round: int
    block_hash: bytes
    signers: tuple
    aggregate: bytes | None = None
    signatures: tuple | None = None
    votes_root: bytes = b""
    votes_ptr: bytes = b""

    def fields(self) -> tuple:
        return (self.height, self.round, self.block_hash, tuple(self.signers), self.aggregate,
                self.signatures, self.votes_root, self.votes_ptr)

    @classmethod
    def from_fields(cls, f):
        return cls(*f)

    def wire_size(self) -> int:
        sig = len(self.aggregate) if self.aggregate else sum(len(s) for s in self.signatures or ())
        return 64 + 4 * len(self.signers) + sig + len(self.votes_root) + len(self.votes_ptr)


@dataclass(frozen=True)
class BlockHeader:
    height: int
    round: int
    prev_hash: bytes
    tx_root: bytes
    proposer: int
    timestamp: float
    last_proof: LastProof | None
    this_hash: bytes = b""
    proposer_sig: bytes = b""
    version: int = 1

    def hashed_fields(self) -> tuple:
        lp = None if self.last_proof is None else self.last_proof.fields()
        return (self.version, self.height, self.round, self.prev_hash, self.tx_root, self.proposer,
                float(self.timestamp), lp)

    def compute_hash(self) -> bytes:
        return h0(versioned("header", *self.hashed_fields()))


def tx_root(txs) -> bytes:
    if not txs:
        return merkle_root([EMPTY_LEAF])
    return merkle_root([tx.encode() for tx in txs])


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    txs: tuple = ()
    # memo for context-free validation results, shared by every holder of this object
    _memo: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def hash(self) -> bytes:
        return self.header.this_hash

    @property
    def height(self) -> int:
        return self.header.height

    def encode(self) -> bytes:
        h = self.header
        return versioned("block", h.hashed_fields(), h.this_hash, h.proposer_sig,
                         tuple(tx.encode() for tx in self.txs))

    def size(self) -> int:
        if "size" not in self._memo:
            self._memo["size"] = len(self.encode())
        return self._memo["size"]


def decode_block(data: bytes) -> Block:
    kind, hf, this_hash, psig, txs = unversioned(data)
    if kind != "block":
        raise CodecError("not a block")
    version, height, rnd, prev, root, proposer, ts, lp = hf
    last_proof = None if lp is None else LastProof.from_fields(lp)
    header = BlockHeader(height, rnd, prev, root, proposer, ts, last_proof, this_hash, psig, version)
    return Block(header, tuple(decode_tx(t) for t in txs))


class InvalidTransaction(ValueError):
    def __init__(self, offenders):
        super().__init__(f"invalid transactions at positions {offenders}")
        self.offenders = offenders


def assemble_block(txs, parent_hash: bytes, height: int, proposer: int, proposer_sk: int,
                   last_proof: LastProof | None, round: int = 0, timestamp: float = 0.0,
                   tx_check=None, backend: str = "sim") -> Block:
    """Package transactions into a signed block.

    tx_check(tx) returns None for a valid tx or a reason string; offenders
    are reported together.
    """
    txs = tuple(txs)
    if tx_check is not None:
        bad = [i for i, tx in enumerate(txs) if tx_check(tx) is not None]
        if bad:
            raise InvalidTransaction(bad)
    header = BlockHeader(height, round, parent_hash, tx_root(txs), proposer, timestamp, last_proof)
    digest = header.compute_hash()
    sig = sign(digest, proposer_sk, backend)
    header = BlockHeader(height, round, parent_hash, header.tx_root, proposer, timestamp, last_proof,
                         digest, sig)
    return Block(header, txs)


GENESIS_HASH = h0(b"rescuesim/genesis")
